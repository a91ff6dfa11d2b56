#include "cpsvuln/attacksynth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpsvuln/error.hpp"

namespace cpsvuln {

const char* to_string(PlanKind k) {
  switch (k) {
    case PlanKind::kStrictGeometricLoop: return "strict-geometric-loop";
    case PlanKind::kEigenGrowth: return "eigen-growth";
    case PlanKind::kMarginalGrowth: return "marginal-growth";
  }
  return "unknown";
}

namespace {

Vec pick_part(const CVec& c, int part) { return part == 0 ? Vec(c.real()) : Vec(c.imag()); }

InputSequence evaluate_strict(const AttackPlan& plan, Index T) {
  const ZeroOutputLoop& lp = *plan.base_loop;
  const double c = plan.growth_base;
  InputSequence out;
  out.reserve(static_cast<size_t>(std::max<Index>(T, 0)));
  for (Index k = 0; k < T; ++k) {
    // Horner form of sum_{j < G} c^j zeta_{k-j}.
    Vec acc = Vec::Zero(plan.attack_dim);
    for (Index j = plan.growth_terms - 1; j >= 0; --j) {
      acc *= c;
      if (k - j >= 0) acc += lp.input_at(k - j);
    }
    out.push_back(plan.scale * acc);
  }
  return out;
}

InputSequence evaluate_growth(const AttackPlan& plan, Index T) {
  const Index n = plan.state_dim;
  const Complex lam = plan.growth.lambda;
  const CVec psi_v = plan.growth.Psi.cast<Complex>() * plan.growth.v;
  InputSequence out;
  out.reserve(static_cast<size_t>(std::max<Index>(T, 0)));
  Complex lam_pow = 1.0;  // lambda^{k-n} for k >= n
  for (Index k = 0; k < T; ++k) {
    CVec zeta;
    if (k < n) {
      zeta = plan.reach_inputs[static_cast<size_t>(k)];
    } else if (plan.kind == PlanKind::kEigenGrowth) {
      zeta = lam_pow * psi_v;
      lam_pow *= lam;
    } else {
      // zeta_{nK+j} = K lambda^{nK+j-n} Psi v + lambda^{nK} zeta_j.
      const Index K = k / n;
      const Index j = k % n;
      const Complex lam_nK = std::pow(lam, static_cast<double>(n * K));
      zeta = static_cast<double>(K) * lam_pow * psi_v +
             lam_nK * plan.reach_inputs[static_cast<size_t>(j)];
      lam_pow *= lam;
    }
    out.push_back(plan.scale * pick_part(zeta, plan.part));
  }
  return out;
}

double replay_max_dz(const DeltaTrajectory& tr, Index horizon) {
  double m = 0.0;
  const Index last = std::min(horizon, tr.horizon());
  for (Index t = 0; t <= last; ++t) m = std::max(m, tr.dz_norm(t));
  return m;
}

}  // namespace

InputSequence AttackPlan::evaluate(Index T) const {
  if (kind == PlanKind::kStrictGeometricLoop) {
    if (!base_loop) fail(ErrorCode::kInvalidInput, "attack plan: strict plan without base loop");
    return evaluate_strict(*this, T);
  }
  if (static_cast<Index>(reach_inputs.size()) != state_dim || state_dim == 0) {
    fail(ErrorCode::kInvalidInput, "attack plan: reach phase must have state_dim inputs");
  }
  return evaluate_growth(*this, T);
}

Index divergence_check_horizon(Index n, Complex lambda) {
  Index extra = 20 * n;
  const double mag = std::abs(lambda);
  if (mag > 1.0) {
    const double needed = std::ceil(std::log(100.0) / std::log(mag));
    if (needed < 1e7) extra = std::max(extra, static_cast<Index>(needed));
  }
  return n + extra;
}

AttackPlan synth_strictly_stealthy(const PlantLoop& loop, const AttackSurface& surf,
                                   const VulnerabilityVerdict& verdict, double target_norm) {
  if (verdict.cls != VulnerabilityClass::kStrictlyVulnerable || !verdict.strict_witness) {
    fail(ErrorCode::kPreconditionViolation,
         "synth_strictly_stealthy: verdict is not strictly vulnerable");
  }
  const DifferenceSystem ds = build_difference_system(loop, surf);
  ZeroOutputLoop lp = *verdict.strict_witness;
  if (lp.states.size() < 2 || lp.inputs.empty() || lp.inputs[0].size() != ds.surface.attack_dim()) {
    fail(ErrorCode::kWitnessInvalid, "synth_strictly_stealthy: malformed zero-output loop");
  }
  const double x1 = lp.states[1].norm();
  if (!(x1 > 0.0)) {
    fail(ErrorCode::kWitnessInvalid, "synth_strictly_stealthy: loop never leaves the origin");
  }
  for (Vec& u : lp.inputs) u /= x1;
  for (Vec& x : lp.states) x /= x1;
  double M = 0.0;
  for (const Vec& x : lp.states) M = std::max(M, x.norm());

  AttackPlan plan;
  plan.kind = PlanKind::kStrictGeometricLoop;
  plan.state_dim = loop.n();
  plan.attack_dim = ds.surface.attack_dim();
  plan.growth_base = 2.0 * M + 1.0;
  // ||x'_k|| >= (c^{k-1} + 1) / 2 while the filter is untruncated (k <= G).
  Index k_star = 0;
  if (target_norm > 0.0) {
    k_star = 1;
    while ((std::pow(plan.growth_base, static_cast<double>(k_star - 1)) + 1.0) / 2.0 <
           target_norm) {
      ++k_star;
    }
  }
  plan.growth_terms = k_star + 1;
  plan.horizon_hint = k_star;
  plan.base_loop = std::move(lp);
  return plan;
}

StealthySynthesis synth_stealthy(const PlantLoop& loop, const AttackSurface& surf,
                                 const GrowthWitness& witness, const StealthBudget& budget,
                                 Index horizon, const TolPolicy& tol) {
  if (budget.strict) {
    fail(ErrorCode::kPreconditionViolation, "synth_stealthy: budget must not be strict");
  }
  if (!(budget.delta > 0.0) || !std::isfinite(budget.delta)) {
    fail(ErrorCode::kInvalidInput, "synth_stealthy: delta must be positive");
  }
  const DifferenceSystem ds = build_difference_system(loop, surf, tol);
  const StateSpaceQuad& q = ds.quad;
  const Index n = q.state_dim();
  const Index qd = q.input_dim();
  if (witness.v.size() != n || witness.Psi.rows() != qd || witness.Psi.cols() != n) {
    fail(ErrorCode::kWitnessInvalid, "synth_stealthy: witness shapes do not match the loop");
  }
  const double mag = std::abs(witness.lambda);
  if (mag < 1.0 - tol.unstable_margin) {
    fail(ErrorCode::kWitnessInvalid, "synth_stealthy: witness eigenvalue is stable");
  }

  // Minimum-norm reach phase: x_n = sum_k A^{n-1-k} B zeta_k = v.
  Mat phi(n, n * qd);
  Mat block = q.B;
  for (Index k = n - 1; k >= 0; --k) {
    phi.middleCols(k * qd, qd) = block;
    block = q.A * block;
  }
  const CVec stacked = pseudoinverse(phi, tol).cast<Complex>() * witness.v;
  const double reach_err = (phi.cast<Complex>() * stacked - witness.v).norm();
  if (reach_err > tol.eq_abs * std::max(1.0, spectral_norm(phi))) {
    std::ostringstream msg;
    msg << "synth_stealthy: eigenvector is not reachable (residual " << reach_err << ")";
    fail(ErrorCode::kWitnessInvalid, msg.str());
  }

  AttackPlan plan;
  plan.kind = mag > 1.0 + tol.unstable_margin ? PlanKind::kEigenGrowth : PlanKind::kMarginalGrowth;
  plan.state_dim = n;
  plan.attack_dim = qd;
  for (Index k = 0; k < n; ++k) plan.reach_inputs.push_back(stacked.segment(k * qd, qd));
  plan.growth = {witness.lambda, witness.Psi, witness.v};
  plan.horizon_hint = horizon;

  const Index check = divergence_check_horizon(n, witness.lambda);
  const Index replay_len = std::max(horizon, check);
  std::ostringstream why;
  for (int part : {0, 1}) {
    plan.part = part;
    plan.scale = 1.0;
    const DeltaTrajectory raw = simulate_difference(ds, plan.evaluate(replay_len), replay_len);
    double ratio = 0.0;
    const double base = raw.horizon() >= n ? raw.de_norm(n) : 0.0;
    if (raw.diverged && raw.divergence_step <= check) {
      ratio = INFINITY;
    } else if (base > 0.0) {
      ratio = raw.de_norm(check) / base;
    }
    if (!(ratio >= 10.0)) {
      why << (part == 0 ? "real" : "imaginary") << " part ratio " << ratio << "; ";
      continue;
    }
    const double m = replay_max_dz(raw, horizon > 0 ? horizon : replay_len);
    if (m > 0.0) plan.scale = budget.delta / m;
    StealthySynthesis out;
    out.plan = plan;
    out.replay = simulate_difference(ds, plan.evaluate(replay_len), replay_len);
    out.divergence_ratio = ratio;
    return out;
  }
  fail(ErrorCode::kNumericalFailure,
       "synth_stealthy: divergence check failed at T = " + std::to_string(check) + " (" +
           why.str() + "need >= 10)");
}

AttackPlan rescale_to_budget(const AttackPlan& plan, const DeltaTrajectory& replay,
                             const StealthBudget& budget) {
  if (budget.strict || plan.kind == PlanKind::kStrictGeometricLoop) return plan;
  if (!(replay.max_dz > 0.0)) return plan;
  AttackPlan out = plan;
  out.scale *= budget.delta / replay.max_dz;
  return out;
}

}  // namespace cpsvuln
