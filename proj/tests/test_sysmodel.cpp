#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "cpsvuln/error.hpp"
#include "cpsvuln/sysmodel.hpp"
#include "testkit.hpp"

using namespace cpsvuln;
using testkit::mat;
using testkit::vec;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& err) {
    return err.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIoError;
}

InputSequence random_attack(std::mt19937_64& rng, Index q, Index T) {
  std::normal_distribution<double> g;
  InputSequence a;
  for (Index t = 0; t < T; ++t) {
    Vec v(q);
    for (Index i = 0; i < q; ++i) v(i) = g(rng);
    a.push_back(v);
  }
  return a;
}

}  // namespace

TEST(DifferenceSystem, CaseTwoMatrices) {
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), testkit::case_surface(2));
  EXPECT_LE((ds.quad.A - mat({{0.4, 0}, {0.8, -0.6}})).norm(), 1e-15);
  EXPECT_LE((ds.quad.B - mat({{0}, {-1.6}})).norm(), 1e-15);
  EXPECT_LE((ds.quad.C - mat({{1, 0}, {1, 1}})).norm(), 1e-15);
  EXPECT_LE((ds.quad.D - mat({{0}, {1}})).norm(), 1e-15);
}

TEST(DifferenceSystem, CaseOneFeedthrough) {
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), testkit::case_surface(1));
  // [C B_a, I] with C = I and B_a = e_1.
  EXPECT_LE((ds.quad.D - mat({{1, 1, 0}, {0, 0, 1}})).norm(), 0.0);
  EXPECT_EQ(ds.quad.B.cols(), 3);
}

TEST(DifferenceSystem, EmptySurfaceHasZeroColumns) {
  const auto surf = AttackSurface::make(Mat(2, 0), {}, 2);
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), surf);
  EXPECT_EQ(ds.quad.B.rows(), 2);
  EXPECT_EQ(ds.quad.B.cols(), 0);
  EXPECT_EQ(ds.quad.D.rows(), 2);
  EXPECT_EQ(ds.quad.D.cols(), 0);
}

TEST(DifferenceSystem, MatchesHandProductsOnRandomLoops) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rc = testkit::random_case(rng);
    const auto& l = rc.loop;
    const auto& s = rc.surface;
    const DifferenceSystem ds = build_difference_system(l, s);
    const Mat IKC = Mat::Identity(l.n(), l.n()) - l.K * l.C;
    Mat B(l.n(), s.attack_dim()), D(l.m(), s.attack_dim());
    B << IKC * s.B_a, -l.K * s.Gamma_a;
    D << l.C * s.B_a, s.Gamma_a;
    EXPECT_LE((ds.quad.A - IKC * l.A).norm(), 1e-12);
    EXPECT_LE((ds.quad.B - B).norm(), 1e-12);
    EXPECT_LE((ds.quad.C - l.C * l.A).norm(), 1e-12);
    EXPECT_LE((ds.quad.D - D).norm(), 1e-12);
  }
}

TEST(StrictTestQuad, CaseOne) {
  const StateSpaceQuad q = build_strict_test_quad(testkit::double_integrator(), testkit::case_surface(1));
  EXPECT_EQ(q.A, mat({{1, 0}, {1, 1}}));
  EXPECT_EQ(q.B, mat({{1, 0, 0}, {0, 0, 0}}));
  EXPECT_EQ(q.C, Mat::Identity(2, 2));
  EXPECT_EQ(q.D, mat({{0, 1, 0}, {0, 0, 1}}));
}

TEST(StrictTestQuad, CaseThreeAndNoSensors) {
  const StateSpaceQuad q = build_strict_test_quad(testkit::double_integrator(), testkit::case_surface(3));
  EXPECT_EQ(q.B, Mat::Zero(2, 1));
  EXPECT_EQ(q.D, mat({{1}, {0}}));
  const auto surf = AttackSurface::make(mat({{1}, {0}}), {}, 2);
  const StateSpaceQuad q2 = build_strict_test_quad(testkit::double_integrator(), surf);
  EXPECT_EQ(q2.D, Mat::Zero(2, 1));
}

TEST(AttackSurface, Validation) {
  const Index n = 2, m = 2;
  EXPECT_EQ(code_of([&] { AttackSurface::make(Mat(2, 0), {0, 0}, m).validate(n, m); }),
            ErrorCode::kInvalidModel);
  EXPECT_EQ(code_of([&] { AttackSurface::make(Mat(2, 0), {2}, m).validate(n, m); }),
            ErrorCode::kInvalidModel);
  EXPECT_EQ(code_of([&] { AttackSurface::make(mat({{1, 2}, {2, 4}}), {}, m).validate(n, m); }),
            ErrorCode::kInvalidModel);
}

TEST(PlantLoop, ValidationNamesTheField) {
  PlantLoop p = testkit::double_integrator();
  p.K = mat({{0, 0}, {0, 0}});
  try {
    p.validate();
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kInvalidModel);
    EXPECT_NE(std::string(err.what()).find("K"), std::string::npos) << err.what();
  }
  p = testkit::double_integrator();
  p.L = mat({{0, 0}});
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kInvalidModel);
  p = testkit::double_integrator();
  p.W_cov = mat({{1, 0}, {0, -1}});
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kInvalidModel);
  p = testkit::double_integrator();
  p.C = mat({{1, 0, 0}});
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kInvalidModel);
}

TEST(SimulateDifference, ZeroAttackStaysAtZero) {
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), testkit::case_surface(1));
  const auto tr = simulate_difference(ds, InputSequence(50, Vec::Zero(3)), 50);
  EXPECT_EQ(tr.horizon(), 50);
  for (Index t = 0; t <= 50; ++t) {
    EXPECT_EQ(tr.de_norm(t), 0.0);
    EXPECT_EQ(tr.dz_norm(t), 0.0);
    EXPECT_EQ(tr.delta_xhat[static_cast<size_t>(t)].norm(), 0.0);
  }
  EXPECT_FALSE(tr.diverged);
}

TEST(SimulateDifference, TwoStepReachOnCaseTwo) {
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), testkit::case_surface(2));
  const double eps = 0.37;
  const InputSequence a{vec({-eps / 1.6}), vec({-eps})};
  const auto tr = simulate_difference(ds, a, 2);
  EXPECT_LE((tr.delta_e[2] - vec({0, eps})).norm(), 1e-15);
}

TEST(SimulateDifference, ImpulseGivesMarkovParameters) {
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), testkit::case_surface(3));
  const InputSequence a{vec({1}), vec({0}), vec({0})};
  const auto tr = simulate_difference(ds, a, 3);
  EXPECT_EQ(tr.dz_norm(0), 0.0);
  EXPECT_LE((tr.delta_z[1] - Vec(ds.quad.D.col(0))).norm(), 1e-15);
  EXPECT_LE((tr.delta_z[2] - Vec(ds.quad.C * ds.quad.B)).norm(), 1e-15);
  // Hand values: D = e_1; CA * (-K e_1) = [[1,0],[1,1]] * (-0.6, 1.4).
  EXPECT_LE((tr.delta_z[2] - vec({-0.6, 0.8})).norm(), 1e-15);
}

TEST(SimulateDifference, ClampsInsteadOfOverflowing) {
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), testkit::case_surface(2));
  InputSequence a;
  for (int t = 0; t < 200; ++t) a.push_back(vec({std::pow(10.0, t / 5.0)}));
  const auto tr = simulate_difference(ds, a, 200);
  EXPECT_TRUE(tr.diverged);
  EXPECT_GT(tr.divergence_step, 0);
  for (const Vec& e : tr.delta_e) EXPECT_TRUE(e.allFinite());
}

TEST(SimulateDifference, RejectsShortAttack) {
  const DifferenceSystem ds = build_difference_system(testkit::double_integrator(), testkit::case_surface(2));
  EXPECT_THROW(simulate_difference(ds, InputSequence(3, Vec::Zero(1)), 10), Error);
}

TEST(SimulateClosedLoop, NoNoiseNoAttack) {
  const auto tr = simulate_closed_loop(testkit::double_integrator(), testkit::case_surface(1),
                                       InputSequence(30, Vec::Zero(3)), NoiseSpec{0, false}, 30);
  ASSERT_EQ(tr.x.size(), tr.x_att.size());
  for (size_t t = 0; t < tr.x.size(); ++t) EXPECT_EQ(tr.x[t], tr.x_att[t]);
}

TEST(SimulateClosedLoop, ZeroAttackCancelsNoiseExactly) {
  for (std::uint64_t seed : {1u, 7u, 12345u}) {
    const auto tr = simulate_closed_loop(testkit::double_integrator(), testkit::case_surface(1),
                                         InputSequence(100, Vec::Zero(3)), NoiseSpec{seed, true}, 100);
    for (size_t t = 0; t < tr.x.size(); ++t) {
      EXPECT_EQ(tr.x[t], tr.x_att[t]);
      EXPECT_EQ(tr.xhat[t], tr.xhat_att[t]);
      EXPECT_EQ(tr.delta.delta_e[t].norm(), 0.0);
    }
    EXPECT_GT(tr.x.back().norm(), 0.0);
  }
}

TEST(SimulateClosedLoop, UnattackedChannelsMatchHealthyBitForBit) {
  // An attack on a surface with no channels cannot move the attacked run.
  const auto surf = AttackSurface::make(Mat(2, 0), {}, 2);
  const auto tr = simulate_closed_loop(testkit::double_integrator(), surf, InputSequence(40, Vec(0)),
                                       NoiseSpec{3, true}, 40);
  for (size_t t = 0; t < tr.x.size(); ++t) {
    EXPECT_EQ(tr.x[t], tr.x_att[t]);
    EXPECT_EQ(tr.z[t], tr.z_att[t]);
  }
}

TEST(SimulateClosedLoop, NoisyDeltaMatchesDifferenceReplay) {
  const auto loop = testkit::double_integrator();
  const auto surf = testkit::case_surface(2);
  InputSequence a;
  for (int t = 0; t < 200; ++t) a.push_back(vec({std::sin(0.1 * t) - (t % 7 == 0 ? 1.0 : 0.0)}));
  const auto noisy = simulate_closed_loop(loop, surf, a, NoiseSpec{7, true}, 200);
  const auto det = simulate_difference(build_difference_system(loop, surf), a, 200);
  double gap = 0.0;
  for (size_t t = 0; t <= 200; ++t) {
    gap = std::max(gap, (noisy.delta.delta_e[t] - det.delta_e[t]).norm());
    gap = std::max(gap, (noisy.delta.delta_z[t] - det.delta_z[t]).norm());
    gap = std::max(gap, (noisy.delta.delta_x[t] - det.delta_x[t]).norm());
  }
  EXPECT_LE(gap, 1e-10);
}

TEST(SimulateClosedLoop, DeltaFieldsAreAttackedMinusHealthy) {
  std::mt19937_64 rng(8);
  const auto rc = testkit::random_case(rng, false);
  const auto a = random_attack(rng, rc.surface.attack_dim(), 60);
  const auto tr = simulate_closed_loop(rc.loop, rc.surface, a, NoiseSpec{2, true}, 60);
  for (size_t t = 0; t < tr.x.size(); ++t) {
    const Vec e = tr.x[t] - tr.xhat[t], e_att = tr.x_att[t] - tr.xhat_att[t];
    EXPECT_LE((tr.delta.delta_e[t] - (e_att - e)).norm(), 1e-9 * (1 + e.norm()));
    EXPECT_LE((tr.delta.delta_z[t] - (tr.z_att[t] - tr.z[t])).norm(), 1e-9 * (1 + tr.z[t].norm()));
  }
  EXPECT_EQ(tr.delta.delta_e[0].norm(), 0.0);
  EXPECT_EQ(tr.delta.delta_z[0].norm(), 0.0);
}

TEST(EstimatorBias, BoundsDeltaXhatOnRandomAttacks) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rc = testkit::random_case(rng, false);
    const double c = estimator_bias_gain(rc.loop);
    const auto ds = build_difference_system(rc.loop, rc.surface);
    const auto a = random_attack(rng, rc.surface.attack_dim(), 80);
    const auto tr = simulate_difference(ds, a, 80);
    for (size_t t = 0; t < tr.delta_e.size(); ++t) {
      EXPECT_LE(tr.delta_xhat[t].norm(), c * tr.max_dz * (1 + 1e-9) + 1e-12);
      EXPECT_LE((tr.delta_x[t] - tr.delta_e[t] - tr.delta_xhat[t]).norm(), 1e-9 * (1 + tr.delta_x[t].norm()));
    }
  }
}
