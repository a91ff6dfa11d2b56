#include <random>

#include <gtest/gtest.h>

#include "cpsvuln/error.hpp"
#include "cpsvuln/geometry.hpp"
#include "cpsvuln/invertibility.hpp"
#include "testkit.hpp"

using namespace cpsvuln;
using testkit::mat;
using testkit::vec;

namespace {

StateSpaceQuad case_quad(int which) {
  return build_difference_system(testkit::double_integrator(), testkit::case_surface(which)).quad;
}

double quad_scale(const StateSpaceQuad& q) {
  Mat sys(q.state_dim() + q.output_dim(), q.state_dim() + q.input_dim());
  sys << q.A, q.B, q.C, q.D;
  return std::max(1.0, spectral_norm(sys));
}

// Best achievable residual of "A x + B u in V and C x + D u = 0" over u.
double invariance_residual(const StateSpaceQuad& q, const Subspace& V, const Vec& x) {
  const Mat P = V.complement_projector();
  Mat G(q.state_dim() + q.output_dim(), q.input_dim());
  G << P * q.B, q.D;
  Vec h(q.state_dim() + q.output_dim());
  h << P * q.A * x, q.C * x;
  if (G.cols() == 0) return h.norm();
  const Vec u = G.completeOrthogonalDecomposition().solve(-h);
  return (G * u + h).norm();
}

// Transfer function (z - zero) / ((z - 0.2)(z + 0.3)) in controllable form.
StateSpaceQuad companion_with_zero(double zero) {
  return StateSpaceQuad{mat({{0, 1}, {0.06, -0.1}}), mat({{0}, {1}}), mat({{-zero, 1}}), mat({{0}})};
}

}  // namespace

TEST(MaxOutputNulling, CaseTwo) {
  const InvariantSubspaceResult r = max_output_nulling_subspace(case_quad(2));
  const Subspace e2 = Subspace::span_of(vec({0, 1}));
  EXPECT_TRUE(r.V_m.same_span(e2, 1e-12));
  EXPECT_TRUE(r.V_star.same_span(e2, 1e-12));
}

TEST(MaxOutputNulling, IdentityOutputHasOnlyOrigin) {
  const StateSpaceQuad q{mat({{1, 2}, {3, 4}}), mat({{1}, {1}}), Mat::Identity(2, 2), Mat::Zero(2, 1)};
  EXPECT_EQ(max_output_nulling_subspace(q).V_m.dim(), 0);
}

TEST(MaxOutputNulling, ZeroOutputKeepsEverything) {
  const StateSpaceQuad q{mat({{1, 0, 0}, {1, 1, 0}, {0, 0, 0.5}}), mat({{1}, {0}, {0}}), Mat::Zero(1, 3),
                         Mat::Zero(1, 1)};
  const InvariantSubspaceResult r = max_output_nulling_subspace(q);
  EXPECT_EQ(r.V_m.dim(), 3);
  EXPECT_TRUE(r.V_star.same_span(reachable_subspace(q.A, q.B, TolPolicy{}), 1e-12));
  EXPECT_EQ(r.V_star.dim(), 2);
}

TEST(MaxOutputNulling, InvariantsOnRandomQuads) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> nd(1, 4), qd(1, 3), rd(1, 3);
  const TolPolicy tol;
  for (int trial = 0; trial < 100; ++trial) {
    const StateSpaceQuad q = testkit::random_real_quad(rng, nd(rng), qd(rng), rd(rng));
    const InvariantSubspaceResult r = max_output_nulling_subspace(q);
    const double s = quad_scale(q);
    EXPECT_LE(r.iterations, q.state_dim() + 1);
    for (Index j = 0; j < r.V_m.dim(); ++j) {
      EXPECT_LE(invariance_residual(q, r.V_m, r.V_m.basis().col(j)), 1e-7 * s);
    }
    EXPECT_TRUE(r.V_m.contains(r.V_star, 1e-9));
    EXPECT_LE(reachable_subspace(q.A, q.B, tol).max_column_distance(r.V_star.basis()), 1e-7);
    // Without a direct null input (ker [B; D] = 0), a zero-output loop moves
    // the state, so it lives in a nontrivial output-nulling invariant set.
    Mat BD(q.state_dim() + q.output_dim(), q.input_dim());
    BD << q.B, q.D;
    if (!test_invertibility(q).invertible && numerical_rank(BD, tol) == q.input_dim()) {
      EXPECT_GE(r.V_m.dim(), 1);
    }
  }
}

TEST(FriendMatrix, CaseTwo) {
  const StateSpaceQuad q = case_quad(2);
  const FriendMatrix f = friend_matrix(q, Subspace::span_of(vec({0, 1})));
  EXPECT_LE((f.Q_f - mat({{0, -1}})).norm(), 1e-12);
  // Uniqueness: the stacked input map restricted to V has no kernel.
  const Mat P = Subspace::span_of(vec({0, 1})).complement_projector();
  Mat G(4, 1);
  G << P * q.B, q.D;
  EXPECT_EQ(kernel_basis(G, TolPolicy{}).dim(), 0);
}

TEST(FriendMatrix, ZeroSubspace) {
  const FriendMatrix f = friend_matrix(case_quad(2), Subspace(2));
  EXPECT_EQ(f.Q_f, Mat::Zero(1, 2));
}

TEST(FriendMatrix, RejectsNonInvariantSubspace) {
  try {
    friend_matrix(case_quad(2), Subspace::span_of(vec({1, 0})));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kNotInvariant);
  }
}

TEST(FriendMatrix, InvarianceOnRandomQuads) {
  std::mt19937_64 rng(78);
  std::uniform_int_distribution<int> nd(1, 4), qd(1, 3), rd(1, 3);
  const TolPolicy tol;
  for (int trial = 0; trial < 100; ++trial) {
    const StateSpaceQuad q = testkit::random_real_quad(rng, nd(rng), qd(rng), rd(rng));
    const InvariantSubspaceResult r = max_output_nulling_subspace(q);
    const FriendMatrix f = friend_matrix(q, r.V_star);
    const Mat X = r.V_star.basis();
    if (X.cols() == 0) continue;
    const double s = quad_scale(q) * std::max(1.0, spectral_norm(f.Q_f));
    EXPECT_LE((r.V_star.complement_projector() * (q.A + q.B * f.Q_f) * X).norm(), 10 * tol.eq_abs * s);
    EXPECT_LE(((q.C + q.D * f.Q_f) * X).norm(), 10 * tol.eq_abs * s);
  }
}

TEST(ZeroDynamics, CaseTwoMarginalMode) {
  const ZeroDynamicsSearch s = find_unstable_reachable_zero_dynamics(case_quad(2));
  ASSERT_TRUE(s.witness.has_value());
  EXPECT_NEAR(std::abs(s.witness->lambda - 1.0), 0.0, 1e-12);
  EXPECT_LE((s.witness->v - vec({0, 1}).cast<Complex>()).norm(), 1e-12);
  EXPECT_LE(s.witness->residual, 1e-12);
}

TEST(ZeroDynamics, CaseThreeHasNone) {
  const ZeroDynamicsSearch s = find_unstable_reachable_zero_dynamics(case_quad(3));
  EXPECT_FALSE(s.witness.has_value());
}

TEST(ZeroDynamics, MinimumPhaseCompanionHasNone) {
  const ZeroDynamicsSearch s = find_unstable_reachable_zero_dynamics(companion_with_zero(0.5));
  EXPECT_FALSE(s.witness.has_value());
  EXPECT_EQ(s.subspaces.V_star.dim(), 1);
  EXPECT_NEAR(s.restricted_spectral_radius, 0.5, 1e-10);
}

TEST(ZeroDynamics, NonMinimumPhaseCompanionHasWitness) {
  const StateSpaceQuad q = companion_with_zero(2.0);
  const ZeroDynamicsSearch s = find_unstable_reachable_zero_dynamics(q);
  ASSERT_TRUE(s.witness.has_value());
  EXPECT_NEAR(std::abs(s.witness->lambda - 2.0), 0.0, 1e-10);
  // The zero direction of (z - 2): x = (1, 2) up to scale.
  const CVec v = s.witness->v;
  EXPECT_NEAR(std::abs(v(1) / v(0) - 2.0), 0.0, 1e-10);
  EXPECT_LE((q.C.cast<Complex>() * v).norm(), 1e-10);
}

TEST(ZeroDynamics, ScaleInvariance) {
  std::mt19937_64 rng(79);
  std::uniform_int_distribution<int> nd(2, 4), qd(1, 2), rd(1, 2);
  const TolPolicy tol;
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const StateSpaceQuad q = testkit::random_real_quad(rng, nd(rng), qd(rng), rd(rng));
    if (!test_invertibility(q).invertible) continue;  // friend not unique otherwise
    const double factor = 3.5;
    StateSpaceQuad s = q;
    s.B *= factor;
    s.D *= factor;
    const ZeroDynamicsSearch a = find_unstable_reachable_zero_dynamics(q);
    const ZeroDynamicsSearch b = find_unstable_reachable_zero_dynamics(s);
    EXPECT_TRUE(a.subspaces.V_m.same_span(b.subspaces.V_m, 1e-8));
    EXPECT_TRUE(a.subspaces.V_star.same_span(b.subspaces.V_star, 1e-8));
    EXPECT_LE((a.friend_.Q_f - factor * b.friend_.Q_f).norm(), tol.eq_abs * (1 + a.friend_.Q_f.norm()));
    EXPECT_NEAR(a.restricted_spectral_radius, b.restricted_spectral_radius, tol.eq_abs);
    EXPECT_EQ(a.witness.has_value(), b.witness.has_value());
    ++compared;
  }
  EXPECT_GE(compared, 10);
}

TEST(ZeroDynamics, WitnessIdentitiesOnRandomQuads) {
  std::mt19937_64 rng(80);
  std::uniform_int_distribution<int> nd(1, 4), qd(1, 3), rd(1, 3);
  const TolPolicy tol;
  int witnesses = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const StateSpaceQuad q = testkit::random_real_quad(rng, nd(rng), qd(rng), rd(rng));
    const ZeroDynamicsSearch s = find_unstable_reachable_zero_dynamics(q);
    if (!s.witness) continue;
    ++witnesses;
    const auto& w = *s.witness;
    const CMat Acl = (q.A + q.B * w.Q_f).cast<Complex>();
    const double scale = quad_scale(q) * std::max(1.0, spectral_norm(w.Q_f));
    EXPECT_NEAR(w.v.norm(), 1.0, 1e-12);
    EXPECT_GE(std::abs(w.lambda), 1.0 - tol.unstable_margin);
    EXPECT_LE((Acl * w.v - w.lambda * w.v).norm(), tol.eq_abs * scale);
    EXPECT_LE(((q.C + q.D * w.Q_f).cast<Complex>() * w.v).norm(), tol.eq_abs * scale);
    EXPECT_LE(reachable_subspace(q.A, q.B, tol).distance(w.v), tol.eq_abs * scale);
  }
  EXPECT_GE(witnesses, 10);
}
