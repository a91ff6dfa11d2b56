#include "cpsvuln/freqbound.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "cpsvuln/classifier.hpp"
#include "cpsvuln/error.hpp"

namespace cpsvuln {

namespace {

struct PointTransfer {
  CMat T, S, R;
};

PointTransfer transfer_at(const StateSpaceQuad& q, Complex z, const TolPolicy& tol) {
  const Index n = q.state_dim();
  const CMat resolvent = z * CMat::Identity(n, n) - q.A.cast<Complex>();
  Eigen::PartialPivLU<CMat> lu(resolvent);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12)) {
    std::ostringstream msg;
    msg << "sample_transfers: resolvent nearly singular at z = " << z << " (rcond " << rcond
        << ")";
    fail(ErrorCode::kNumericalFailure, msg.str());
  }
  PointTransfer p;
  p.T = lu.solve(q.B.cast<Complex>());
  p.S = q.C.cast<Complex>() * p.T + q.D.cast<Complex>();
  p.R = p.T * pseudoinverse(p.S, tol);
  return p;
}

// Steps after which the zero-input response of A_e is negligible.
Index decay_length(const Mat& A) {
  if (A.size() == 0) return 1;
  Mat P = Mat::Identity(A.rows(), A.cols());
  for (Index k = 1; k <= 100000; ++k) {
    P = A * P;
    if (spectral_norm(P) <= 1e-15) return k;
  }
  return 100000;
}

// Smallest L with the non-causal mass beyond lag L negligible.
Index anticausal_length(const ImpulseSeries& imp) {
  const Index N = imp.coeffs.size();
  double rest = 0.0;
  Index L = 0;
  // Walk from the most negative lag inwards.
  for (Index k = 0; k < N / 2; ++k) {
    rest += imp.norms[static_cast<size_t>(k)];
    if (rest > 1e-14 * std::max(1.0, imp.norm_1sp)) {
      L = -(imp.coeffs.first_index + k);
      break;
    }
  }
  return std::max<Index>(L, 1);
}

// Replay, then report the run scaled to max ||Delta z|| = delta.
InnerSample scaled_sample(const DifferenceSystem& ds, const InputSequence& attack, Index T,
                          double delta, const char* source) {
  const Index len = static_cast<Index>(attack.size());
  const DeltaTrajectory tr = simulate_difference(ds, attack, len);
  if (tr.diverged) {
    fail(ErrorCode::kNumericalFailure, "estimate_reachset: replay diverged on an invulnerable loop");
  }
  InnerSample s;
  s.source = source;
  const double scale = tr.max_dz > 0.0 ? delta / tr.max_dz : 0.0;
  s.endpoint = scale * tr.delta_e[static_cast<size_t>(T)];
  double m = 0.0;
  for (const Vec& e : tr.delta_e) m = std::max(m, e.norm());
  s.max_de = scale * m;
  s.max_dz = scale * tr.max_dz;
  return s;
}

InputSequence sinusoid(const CVec& mu, double omega, int part, Index active, Index total) {
  InputSequence seq;
  seq.reserve(static_cast<size_t>(total));
  for (Index t = 0; t < total; ++t) {
    if (t >= active) {
      seq.push_back(Vec::Zero(mu.size()));
      continue;
    }
    const CVec c = std::polar(1.0, omega * static_cast<double>(t)) * mu;
    seq.push_back(part == 0 ? Vec(c.real()) : Vec(c.imag()));
  }
  return seq;
}

}  // namespace

TransferSamples sample_transfers(const PlantLoop& loop, const AttackSurface& surf, Index N,
                                 const TolPolicy& tol) {
  if (N < 2 || (N & (N - 1)) != 0) {
    fail(ErrorCode::kInvalidInput, "sample_transfers: grid size must be a power of two >= 2");
  }
  const DifferenceSystem ds = build_difference_system(loop, surf, tol);
  TransferSamples out;
  out.N = N;
  out.z.resize(static_cast<size_t>(N));
  out.T.resize(static_cast<size_t>(N));
  out.S.resize(static_cast<size_t>(N));
  out.R.resize(static_cast<size_t>(N));
  for (Index j = 0; j <= N / 2; ++j) {
    const size_t k = static_cast<size_t>(j);
    const Complex z = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(j) /
                                          static_cast<double>(N));
    PointTransfer p = transfer_at(ds.quad, z, tol);
    if (j == 0 || j == N / 2) {
      // z = +-1: the exact values are real.
      p.T = p.T.real().cast<Complex>();
      p.S = p.S.real().cast<Complex>();
      p.R = p.R.real().cast<Complex>();
      out.z[k] = Complex(j == 0 ? 1.0 : -1.0, 0.0);
    } else {
      out.z[k] = z;
    }
    out.T[k] = std::move(p.T);
    out.S[k] = std::move(p.S);
    out.R[k] = std::move(p.R);
  }
  for (Index j = N / 2 + 1; j < N; ++j) {
    const size_t k = static_cast<size_t>(j);
    const size_t mirror = static_cast<size_t>(N - j);
    out.z[k] = std::conj(out.z[mirror]);
    out.T[k] = out.T[mirror].conjugate();
    out.S[k] = out.S[mirror].conjugate();
    out.R[k] = out.R[mirror].conjugate();
  }
  return out;
}

ImpulseSeries impulse_series(const TransferSamples& samples, const TolPolicy& tol) {
  ImpulseSeries out;
  out.coeffs = dft_grid_to_impulse(samples.R, tol);
  const Index N = out.coeffs.size();
  out.norms.reserve(static_cast<size_t>(N));
  for (Index k = 0; k < N; ++k) {
    const double nk = spectral_norm(out.coeffs.coeffs[static_cast<size_t>(k)]);
    out.norms.push_back(nk);
    out.norm_1sp += nk;
    const Index s = out.coeffs.first_index + k;
    if (8 * std::abs(s) >= 3 * N) out.tail_mass += nk;
  }
  return out;
}

KernelConditionReport check_kernel_condition(const TransferSamples& samples,
                                             const TolPolicy& tol) {
  KernelConditionReport rep;
  rep.point_ok.assign(samples.S.size(), true);
  for (size_t j = 0; j < samples.S.size(); ++j) {
    const CMat ker = complex_kernel_basis(samples.S[j], tol);
    if (ker.cols() == 0) continue;
    const double t_norm = spectral_norm(samples.T[j]);
    double worst = 0.0;
    for (Index c = 0; c < ker.cols(); ++c) worst = std::max(worst, (samples.T[j] * ker.col(c)).norm());
    const double ratio = t_norm > 0.0 ? worst / t_norm : 0.0;
    rep.worst_ratio = std::max(rep.worst_ratio, ratio);
    if (worst > tol.eq_abs * t_norm) {
      rep.point_ok[j] = false;
      rep.all_ok = false;
    }
  }
  return rep;
}

BoundReport compute_bound(const PlantLoop& loop, const AttackSurface& surf, double delta,
                          const TolPolicy& tol, Index max_grid) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    fail(ErrorCode::kInvalidInput, "compute_bound: delta must be finite and non-negative");
  }
  BoundReport rep;
  rep.delta = delta;
  TransferSamples last;
  double prev = -1.0;
  for (Index N = kMinGrid; N <= std::max(max_grid, kMinGrid); N *= 2) {
    TransferSamples samples = sample_transfers(loop, surf, N, tol);
    ImpulseSeries imp = impulse_series(samples, tol);
    rep.grid_sizes.push_back(N);
    rep.norms_per_grid.push_back(imp.norm_1sp);
    const double r = imp.norm_1sp;
    rep.tail_mass = imp.tail_mass;
    rep.r_norm_1sp = r;
    rep.impulse = std::move(imp);
    last = std::move(samples);
    const bool stable_norm = prev >= 0.0 && std::abs(r - prev) <= 1e-4 * r;
    const bool small_tail = rep.tail_mass <= 1e-4 * r;
    if (r == 0.0 || (stable_norm && small_tail)) {
      rep.converged = true;
      break;
    }
    prev = r;
  }
  rep.bound = rep.r_norm_1sp * delta;
  const KernelConditionReport kc = check_kernel_condition(last, tol);
  rep.kernel_condition_ok = kc.all_ok;
  rep.kernel_worst_ratio = kc.worst_ratio;
  return rep;
}

ReachSetEstimate estimate_reachset(const PlantLoop& loop, const AttackSurface& surf,
                                   const ReachSetOptions& opts, const TolPolicy& tol) {
  if (!(opts.delta >= 0.0) || !std::isfinite(opts.delta) || opts.T < 1 || opts.n_dirs < 1 ||
      opts.n_samples < 0 || opts.n_freqs < 2) {
    fail(ErrorCode::kInvalidInput, "estimate_reachset: invalid options");
  }
  const VulnerabilityVerdict verdict = classify(loop, surf, tol);
  if (verdict.cls != VulnerabilityClass::kInvulnerable) {
    fail(ErrorCode::kPreconditionViolation,
         std::string("estimate_reachset: loop is ") + to_string(verdict.cls) +
             "; the reachable set is unbounded");
  }
  const DifferenceSystem ds = build_difference_system(loop, surf, tol);
  const Index n = loop.n();
  if (opts.plane_i < 0 || opts.plane_j < 0 || opts.plane_i >= n || opts.plane_j >= n ||
      opts.plane_i == opts.plane_j) {
    fail(ErrorCode::kInvalidInput, "estimate_reachset: plane needs two distinct state indices");
  }

  ReachSetEstimate est;
  est.delta = opts.delta;
  est.T = opts.T;
  est.plane_i = opts.plane_i;
  est.plane_j = opts.plane_j;
  est.bound = compute_bound(loop, surf, opts.delta, tol);
  if (!est.bound.converged) {
    fail(ErrorCode::kNumericalFailure, "estimate_reachset: impulse series did not converge");
  }
  const ImpulseSeries& imp = est.bound.impulse;

  for (Index k = 0; k < opts.n_dirs; ++k) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(k) /
                      static_cast<double>(opts.n_dirs);
    Vec d = Vec::Zero(n);
    d(opts.plane_i) = std::cos(th);
    d(opts.plane_j) = std::sin(th);
    double support = 0.0;
    for (const Mat& Rs : imp.coeffs.coeffs) support += (Rs.transpose() * d).norm();
    est.directions.push_back(std::move(d));
    est.outer_support.push_back(opts.delta * support);
  }

  const Index q = ds.quad.input_dim();
  if (q == 0) return est;
  const Index decay = decay_length(ds.quad.A);
  const Index anti = anticausal_length(imp);

  // Sinusoids keep running past T so the non-causal part of R sees them.
  const Index sin_active = opts.T + anti;
  const Index sin_total = sin_active + decay;
  for (Index f = 0; f < opts.n_freqs; ++f) {
    const double omega = std::numbers::pi * static_cast<double>(f) /
                         static_cast<double>(opts.n_freqs - 1);
    const PointTransfer p = transfer_at(ds.quad, std::polar(1.0, omega), tol);
    std::vector<CVec> dirs;
    Eigen::JacobiSVD<CMat> svd(p.R, Eigen::ComputeFullV);
    if (p.R.size() > 0 && svd.singularValues()(0) > 0.0) {
      dirs.push_back(pseudoinverse(p.S, tol) * svd.matrixV().col(0));
    }
    for (Index i = 0; i < q; ++i) dirs.push_back(CVec::Unit(q, i));
    for (const CVec& mu : dirs) {
      for (int part : {0, 1}) {
        InputSequence seq = sinusoid(mu, omega, part, sin_active, sin_total);
        bool inert = true;
        for (Index t = 0; t < sin_active && inert; ++t) inert = seq[static_cast<size_t>(t)].norm() == 0.0;
        if (inert) continue;
        est.inner.push_back(scaled_sample(ds, seq, opts.T, opts.delta, "sinusoid"));
      }
    }
  }

  // Random attacks stop at T; the zero-input tail lets Delta z decay.
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const Index rnd_total = opts.T + std::max(anti, decay);
  for (Index s = 0; s < opts.n_samples; ++s) {
    InputSequence seq;
    seq.reserve(static_cast<size_t>(rnd_total));
    for (Index t = 0; t < rnd_total; ++t) {
      Vec z = Vec::Zero(q);
      if (t < opts.T) {
        for (Index i = 0; i < q; ++i) z(i) = unif(rng);
      }
      seq.push_back(std::move(z));
    }
    est.inner.push_back(scaled_sample(ds, seq, opts.T, opts.delta, "random"));
  }
  return est;
}

SinusoidAttack worst_sinusoid_attack(const PlantLoop& loop, const AttackSurface& surf,
                                     double delta, Index T, Index n_freqs, const TolPolicy& tol) {
  if (T < 1 || n_freqs < 2 || !(delta > 0.0)) {
    fail(ErrorCode::kInvalidInput, "worst_sinusoid_attack: invalid arguments");
  }
  const DifferenceSystem ds = build_difference_system(loop, surf, tol);
  const Index q = ds.quad.input_dim();
  if (q == 0) fail(ErrorCode::kPreconditionViolation, "worst_sinusoid_attack: no attack channels");
  const Index total = T + decay_length(ds.quad.A);

  SinusoidAttack best;
  bool have = false;
  for (Index f = 0; f < n_freqs; ++f) {
    const double omega = std::numbers::pi * static_cast<double>(f) /
                         static_cast<double>(n_freqs - 1);
    const PointTransfer p = transfer_at(ds.quad, std::polar(1.0, omega), tol);
    Eigen::JacobiSVD<CMat> svd(p.R, Eigen::ComputeFullV);
    if (p.R.size() == 0 || svd.singularValues()(0) == 0.0) continue;
    const CVec mu = pseudoinverse(p.S, tol) * svd.matrixV().col(0);
    for (int part : {0, 1}) {
      const InputSequence seq = sinusoid(mu, omega, part, T, total);
      const DeltaTrajectory tr = simulate_difference(ds, seq, total);
      if (tr.diverged || !(tr.max_dz > 0.0)) continue;
      const double scale = delta / tr.max_dz;
      double m = 0.0;
      for (const Vec& e : tr.delta_e) m = std::max(m, e.norm());
      if (!have || scale * m > best.max_de) {
        have = true;
        best.omega = omega;
        best.mu = mu;
        best.part = part;
        best.max_de = scale * m;
        best.max_dz = delta;
        best.attack = seq;
        for (Vec& z : best.attack) z *= scale;
      }
    }
  }
  if (!have) fail(ErrorCode::kNumericalFailure, "worst_sinusoid_attack: no effective sinusoid");
  return best;
}

}  // namespace cpsvuln
