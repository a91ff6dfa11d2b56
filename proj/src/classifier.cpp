#include "cpsvuln/classifier.hpp"

#include <algorithm>
#include <sstream>

#include "cpsvuln/error.hpp"

namespace cpsvuln {

const char* to_string(VulnerabilityClass c) {
  switch (c) {
    case VulnerabilityClass::kStrictlyVulnerable: return "strictly-vulnerable";
    case VulnerabilityClass::kVulnerableNotStrictly: return "vulnerable";
    case VulnerabilityClass::kInvulnerable: return "invulnerable";
  }
  return "unknown";
}

VulnerabilityVerdict classify(const PlantLoop& loop, const AttackSurface& surf,
                              const TolPolicy& tol) {
  tol.validate();
  const DifferenceSystem ds = build_difference_system(loop, surf, tol);
  const StateSpaceQuad strict_quad = build_strict_test_quad(loop, surf, tol);

  VulnerabilityVerdict out;
  Diagnostics& diag = out.diagnostics;
  diag.tol = tol;
  diag.strict_test = test_invertibility(strict_quad, tol);
  diag.difference_test = test_invertibility(ds.quad, tol);
  if (diag.strict_test.invertible != diag.difference_test.invertible) {
    diag.notes.push_back(
        "strict test and difference system disagree on invertibility; rank margins are thin");
  }

  const bool strict = !diag.strict_test.invertible;
  if (strict) out.strict_witness = find_zero_output_loop(ds.quad, tol);

  const ZeroDynamicsSearch zd = find_unstable_reachable_zero_dynamics(ds.quad, tol);
  diag.dim_V_m = zd.subspaces.V_m.dim();
  diag.dim_V_star = zd.subspaces.V_star.dim();
  diag.subspace_iterations = zd.subspaces.iterations;
  diag.friend_residual = zd.friend_.residual;
  diag.restricted_spectral_radius = zd.restricted_spectral_radius;

  if (zd.witness) {
    const ZeroDynamicsWitness& w = *zd.witness;
    GrowthWitness gw;
    gw.v = w.v;
    gw.lambda = w.lambda;
    gw.Psi = w.Q_f;
    gw.Q = w.Q_f.topRows(surf.p_a());
    gw.W = w.Q_f.bottomRows(surf.m_a());
    gw.from_loop = w.from_loop;
    out.growth_witness = std::move(gw);
    diag.deciding_lambda = w.lambda;
  }

  if (strict) {
    if (!out.growth_witness) {
      fail(ErrorCode::kNumericalFailure,
           "classify: strictly vulnerable loop without an unstable zero-dynamics witness");
    }
    out.cls = VulnerabilityClass::kStrictlyVulnerable;
  } else if (out.growth_witness) {
    out.cls = VulnerabilityClass::kVulnerableNotStrictly;
  } else {
    out.cls = VulnerabilityClass::kInvulnerable;
  }
  return out;
}

WitnessReport verify_witness(const PlantLoop& loop, const AttackSurface& surf,
                             const VulnerabilityVerdict& verdict, const TolPolicy& tol) {
  if (!verdict.growth_witness && !verdict.strict_witness) {
    fail(ErrorCode::kPreconditionViolation, "verify_witness: verdict carries no witness");
  }
  const DifferenceSystem ds = build_difference_system(loop, surf, tol);
  const AttackSurface& s = ds.surface;
  WitnessReport rep;

  if (verdict.growth_witness) {
    const GrowthWitness& w = *verdict.growth_witness;
    const Index n = loop.n();
    if (w.v.size() != n || w.Q.rows() != s.p_a() || w.W.rows() != s.m_a() ||
        w.Q.cols() != n || w.W.cols() != n) {
      fail(ErrorCode::kWitnessInvalid, "verify_witness: witness shapes do not match the loop");
    }
    Mat psi(s.attack_dim(), n);
    psi << w.Q, w.W;
    const CVec& v = w.v;
    const Complex lam = w.lambda;
    auto c = [](const Mat& m) { return CMat(m.cast<Complex>()); };

    rep.eigen_residual = (c(loop.A + s.B_a * w.Q) * v - lam * v).norm();
    const Subspace gamma_span = Subspace::span_of(s.Gamma_a);
    rep.span_residual = gamma_span.distance(CVec(c(loop.C) * v));
    const Subspace reach = reachable_subspace(ds.quad.A, ds.quad.B, tol);
    rep.reach_residual = reach.distance(v);
    rep.output_identity = (c(ds.quad.C + ds.quad.D * psi) * v).norm();
    rep.state_identity = (c(ds.quad.A + ds.quad.B * psi) * v - lam * v).norm();
    rep.magnitude_shortfall = std::max(0.0, 1.0 - tol.unstable_margin - std::abs(lam));
    if (std::abs(v.norm() - 1.0) > 1e-6) {
      fail(ErrorCode::kWitnessInvalid, "verify_witness: eigenvector is not unit norm");
    }
  }

  if (verdict.strict_witness) {
    const ZeroOutputLoop& lp = *verdict.strict_witness;
    if (lp.length() == 0 || lp.inputs[0].size() != s.attack_dim()) {
      fail(ErrorCode::kWitnessInvalid, "verify_witness: strict loop has the wrong input size");
    }
    const Index T = 3 * lp.length();
    InputSequence seq;
    for (Index k = 0; k < T; ++k) seq.push_back(lp.input_at(k));
    rep.strict_loop_max_dz = simulate_difference(ds, seq, T).max_dz;
  }

  rep.max_residual = std::max({rep.eigen_residual, rep.span_residual, rep.reach_residual,
                               rep.output_identity, rep.state_identity, rep.magnitude_shortfall,
                               rep.strict_loop_max_dz});
  rep.valid = rep.max_residual <= 10.0 * tol.eq_abs;
  if (!rep.valid) {
    std::ostringstream msg;
    msg << "verify_witness: residual " << rep.max_residual << " exceeds " << 10.0 * tol.eq_abs;
    fail(ErrorCode::kWitnessInvalid, msg.str());
  }
  return rep;
}

}  // namespace cpsvuln
