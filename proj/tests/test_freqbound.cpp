#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cpsvuln/error.hpp"
#include "cpsvuln/freqbound.hpp"
#include "testkit.hpp"

using namespace cpsvuln;
using testkit::mat;
using testkit::vec;

namespace {

const PlantLoop kLoop = testkit::double_integrator();

// Value cross-checked with an independent numpy evaluation of the same
// sampled-transfer construction (N = 4096).
constexpr double kCaseThreeNorm = 3.16799478385;

TransferSamples constant_samples(Index N, const CMat& T, const CMat& S, const CMat& R) {
  TransferSamples s;
  s.N = N;
  for (Index j = 0; j < N; ++j) {
    s.z.push_back(std::polar(1.0, 2 * std::numbers::pi * double(j) / double(N)));
    s.T.push_back(T);
    s.S.push_back(S);
    s.R.push_back(R);
  }
  return s;
}

}  // namespace

TEST(SampleTransfers, CaseThreeAtOne) {
  const TransferSamples s = sample_transfers(kLoop, testkit::case_surface(3), 64);
  ASSERT_EQ(s.T.size(), 64u);
  EXPECT_NEAR(std::abs(s.z[0] - 1.0), 0.0, 0.0);
  // Hand 2x2 solve: 0.6 t1 = -0.6, -0.8 t1 + 1.6 t2 = 1.4.
  EXPECT_LE((s.T[0] - vec({-1, 0.375}).cast<Complex>()).norm(), 1e-14);
}

TEST(SampleTransfers, ConjugateSymmetry) {
  const TransferSamples s = sample_transfers(kLoop, testkit::case_surface(1), 32);
  for (Index j = 1; j < 32; ++j) {
    EXPECT_LE((s.R[static_cast<size_t>(32 - j)] - s.R[static_cast<size_t>(j)].conjugate()).norm(), 1e-12);
  }
  // Nyquist point is real.
  EXPECT_LE(s.R[16].imag().norm(), 1e-14);
}

TEST(SampleTransfers, StaticSystem) {
  PlantLoop l;
  l.A = Mat::Zero(2, 2);
  l.B = Mat::Identity(2, 2);
  l.C = Mat::Identity(2, 2);
  l.K = Mat::Zero(2, 2);
  l.L = Mat::Zero(2, 2);
  l.W_cov = Mat::Identity(2, 2);
  l.V_cov = Mat::Identity(2, 2);
  const auto surf = AttackSurface::make(Mat(2, 0), {0}, 2);
  const TransferSamples s = sample_transfers(l, surf, 16);
  for (const CMat& S : s.S) EXPECT_LE((S - surf.Gamma_a.cast<Complex>()).norm(), 0.0);
}

TEST(SampleTransfers, EmptySurface) {
  const auto surf = AttackSurface::make(Mat(2, 0), {}, 2);
  const TransferSamples s = sample_transfers(kLoop, surf, 8);
  for (const CMat& T : s.T) EXPECT_EQ(T.cols(), 0);
}

TEST(SampleTransfers, GridMustBePowerOfTwo) {
  EXPECT_THROW(sample_transfers(kLoop, testkit::case_surface(3), 48), Error);
}

TEST(ImpulseSeries, IdentityOperatorHasUnitNorm) {
  const CMat I = CMat::Identity(2, 2);
  const ImpulseSeries imp = impulse_series(constant_samples(64, I, I, I));
  EXPECT_NEAR(imp.norm_1sp, 1.0, 1e-12);
  EXPECT_NEAR(imp.tail_mass, 0.0, 1e-12);
}

TEST(ImpulseSeries, ParsevalOnCaseThree) {
  const TransferSamples s = sample_transfers(kLoop, testkit::case_surface(3), 512);
  const ImpulseSeries imp = impulse_series(s);
  double time = 0.0, freq = 0.0;
  for (const Mat& R : imp.coeffs.coeffs) time += R.squaredNorm();
  for (const CMat& R : s.R) freq += R.squaredNorm();
  freq /= 512.0;
  EXPECT_NEAR(time / freq, 1.0, 1e-6);
}

TEST(ImpulseSeries, RoundTripOnCaseThree) {
  const TransferSamples s = sample_transfers(kLoop, testkit::case_surface(3), 256);
  const ImpulseSeries imp = impulse_series(s);
  for (size_t j = 0; j < s.z.size(); j += 7) {
    EXPECT_LE((evaluate_impulse(imp.coeffs, s.z[j]) - s.R[j]).norm(), imp.tail_mass + TolPolicy{}.eq_abs);
  }
}

TEST(KernelCondition, CaseThreePasses) {
  const KernelConditionReport r = check_kernel_condition(sample_transfers(kLoop, testkit::case_surface(3), 256));
  EXPECT_TRUE(r.all_ok);
  for (bool ok : r.point_ok) EXPECT_TRUE(ok);
}

TEST(KernelCondition, InvertibleSamplesPassVacuously) {
  const CMat I = CMat::Identity(2, 2);
  EXPECT_TRUE(check_kernel_condition(constant_samples(8, I, I, I)).all_ok);
}

TEST(KernelCondition, ScalarCounterexampleFails) {
  const CMat one = CMat::Constant(1, 1, 1.0), zero = CMat::Zero(1, 1);
  const KernelConditionReport r = check_kernel_condition(constant_samples(8, one, zero, zero));
  EXPECT_FALSE(r.all_ok);
  EXPECT_NEAR(r.worst_ratio, 1.0, 1e-15);
}

TEST(ComputeBound, CaseThreeConverges) {
  const BoundReport b = compute_bound(kLoop, testkit::case_surface(3), 1.0);
  EXPECT_TRUE(b.converged);
  EXPECT_TRUE(b.kernel_condition_ok);
  EXPECT_NEAR(b.r_norm_1sp / kCaseThreeNorm, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(b.bound, b.r_norm_1sp * b.delta);
  EXPECT_LT(b.tail_mass, 1e-4 * b.r_norm_1sp);
  ASSERT_GE(b.norms_per_grid.size(), 2u);
  const double a = b.norms_per_grid[b.norms_per_grid.size() - 2], c = b.norms_per_grid.back();
  EXPECT_LE(std::abs(c - a), 1e-4 * c);
}

TEST(ComputeBound, CaseTwoDoesNotConverge) {
  const BoundReport b = compute_bound(kLoop, testkit::case_surface(2), 1.0);
  EXPECT_FALSE(b.converged);
  EXPECT_EQ(b.grid_sizes.back(), kMaxGrid);
  // The norm keeps growing with the grid.
  for (size_t k = 1; k < b.norms_per_grid.size(); ++k) EXPECT_GT(b.norms_per_grid[k], b.norms_per_grid[k - 1]);
}

TEST(ComputeBound, LinearInDelta) {
  const BoundReport a = compute_bound(kLoop, testkit::case_surface(3), 1.0);
  const BoundReport b = compute_bound(kLoop, testkit::case_surface(3), 2.0);
  const BoundReport z = compute_bound(kLoop, testkit::case_surface(3), 0.0);
  EXPECT_DOUBLE_EQ(b.bound, 2.0 * a.bound);
  EXPECT_EQ(z.bound, 0.0);
  EXPECT_THROW(compute_bound(kLoop, testkit::case_surface(3), -1.0), Error);
}

TEST(ComputeBound, DominatesImpulseAttacks) {
  // Any attack, rescaled to max ||Delta z|| = 1, stays inside the ball.
  const BoundReport b = compute_bound(kLoop, testkit::case_surface(3), 1.0);
  const DifferenceSystem ds = build_difference_system(kLoop, testkit::case_surface(3));
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    InputSequence a;
    for (int t = 0; t < 300; ++t) a.push_back(vec({t < 250 ? g(rng) : 0.0}));
    const DeltaTrajectory tr = simulate_difference(ds, a, 300);
    for (const Vec& e : tr.delta_e) EXPECT_LE(e.norm() / tr.max_dz, b.bound * (1 + 1e-6));
  }
}

TEST(ReachSet, CaseThreeInnerInsideOuter) {
  ReachSetOptions o;
  o.n_samples = 100;
  o.n_dirs = 90;
  const ReachSetEstimate est = estimate_reachset(kLoop, testkit::case_surface(3), o);
  EXPECT_TRUE(est.bound.converged);
  ASSERT_EQ(est.outer_support.size(), 90u);
  for (size_t k = 0; k < est.directions.size(); ++k) {
    EXPECT_NEAR(est.directions[k].norm(), 1.0, 1e-14);
    EXPECT_LE(est.outer_support[k], est.bound.bound * (1 + 1e-12));
  }
  for (const InnerSample& s : est.inner) {
    EXPECT_LE(s.max_de, est.bound.bound * (1 + 1e-6));
    EXPECT_NEAR(s.max_dz, 1.0, 1e-12);
    for (size_t k = 0; k < est.directions.size(); ++k) {
      EXPECT_LE(s.endpoint.dot(est.directions[k]), est.outer_support[k] * (1 + 1e-6));
    }
  }
}

TEST(ReachSet, ZeroDelta) {
  ReachSetOptions o;
  o.delta = 0.0;
  o.n_samples = 20;
  o.n_dirs = 12;
  o.n_freqs = 5;
  const ReachSetEstimate est = estimate_reachset(kLoop, testkit::case_surface(3), o);
  for (double h : est.outer_support) EXPECT_EQ(h, 0.0);
  for (const InnerSample& s : est.inner) EXPECT_EQ(s.endpoint.norm(), 0.0);
}

TEST(ReachSet, DoublingDelta) {
  ReachSetOptions o;
  o.n_samples = 30;
  o.n_dirs = 24;
  o.n_freqs = 9;
  const ReachSetEstimate a = estimate_reachset(kLoop, testkit::case_surface(3), o);
  o.delta = 2.0;
  const ReachSetEstimate b = estimate_reachset(kLoop, testkit::case_surface(3), o);
  ASSERT_EQ(a.inner.size(), b.inner.size());
  for (size_t k = 0; k < a.outer_support.size(); ++k) {
    EXPECT_NEAR(b.outer_support[k], 2.0 * a.outer_support[k], 1e-12 * a.outer_support[k]);
  }
  for (size_t k = 0; k < a.inner.size(); ++k) {
    EXPECT_LE((b.inner[k].endpoint - 2.0 * a.inner[k].endpoint).norm(), 1e-12 * (1 + a.inner[k].endpoint.norm()));
  }
}

TEST(ReachSet, RefusesVulnerableLoops) {
  ReachSetOptions o;
  o.n_samples = 5;
  try {
    estimate_reachset(kLoop, testkit::case_surface(2), o);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kPreconditionViolation);
  }
}

TEST(WorstSinusoid, CaseThreeIsInsideTheBound) {
  const BoundReport b = compute_bound(kLoop, testkit::case_surface(3), 1.0);
  const SinusoidAttack sa = worst_sinusoid_attack(kLoop, testkit::case_surface(3), 1.0, 200, 65);
  const DeltaTrajectory tr =
      simulate_difference(build_difference_system(kLoop, testkit::case_surface(3)), sa.attack,
                          static_cast<Index>(sa.attack.size()));
  EXPECT_NEAR(tr.max_dz, 1.0, 1e-9);
  double m = 0.0;
  for (const Vec& e : tr.delta_e) m = std::max(m, e.norm());
  EXPECT_NEAR(m, sa.max_de, 1e-9 * m);
  EXPECT_LE(m, b.bound * (1 + 1e-6));
  EXPECT_GE(m, 0.25 * b.bound);
}
