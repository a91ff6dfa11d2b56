#include "cpsvuln/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpsvuln/error.hpp"
#include "cpsvuln/invertibility.hpp"

namespace cpsvuln {

namespace {

double quad_scale(const StateSpaceQuad& q) {
  Mat sys(q.state_dim() + q.output_dim(), q.state_dim() + q.input_dim());
  sys << q.A, q.B, q.C, q.D;
  return std::max(1.0, spectral_norm(sys));
}

// Largest violation of "(A + B F) X stays in V and (C + D F) X vanishes".
double friend_violation(const StateSpaceQuad& q, const Subspace& V, const Mat& F) {
  if (V.dim() == 0) return 0.0;
  const Mat& X = V.basis();
  const Mat moved = V.complement_projector() * (q.A + q.B * F) * X;
  const Mat out = (q.C + q.D * F) * X;
  double worst = 0.0;
  for (Index j = 0; j < X.cols(); ++j) {
    worst = std::max(worst, std::hypot(moved.col(j).norm(), out.col(j).norm()));
  }
  return worst;
}

// First entry above noise level made real positive.
void normalize_phase(CVec& v) {
  const double nv = v.norm();
  if (nv == 0.0) return;
  v /= nv;
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i));
    if (mag > 1e-9) {
      v *= std::conj(v(i)) / mag;
      v(i) = Complex(v(i).real(), 0.0);
      break;
    }
  }
}

bool dominates(const Complex& a, const Complex& b) {
  const double ma = std::abs(a);
  const double mb = std::abs(b);
  const double slack = 1e-12 * std::max(1.0, std::max(ma, mb));
  if (ma > mb + slack) return true;
  if (ma < mb - slack) return false;
  if (a.real() > b.real() + slack) return true;
  if (a.real() < b.real() - slack) return false;
  return a.imag() > b.imag();
}

// With a zero-output loop u_0..u_T (x_0 = x_{T+1} = 0), x = sum_k lambda^{-k} x_k and
// u = sum_k lambda^{-k} u_k satisfy A x + B u = lambda x and C x + D u = 0 for
// every lambda != 0, so any lambda can be realized on span{x} ⊆ V_star.
std::optional<ZeroDynamicsWitness> witness_from_loop(const StateSpaceQuad& q,
                                                     const Subspace& V_star,
                                                     const FriendMatrix& base,
                                                     const TolPolicy& tol) {
  ZeroOutputLoop loop;
  try {
    loop = find_zero_output_loop(q, tol);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSearchExhausted) return std::nullopt;
    throw;
  }
  const double scale = quad_scale(q);
  double state_scale = 0.0;
  for (const Vec& s : loop.states) state_scale = std::max(state_scale, s.norm());
  if (state_scale == 0.0) return std::nullopt;

  for (double lambda : {2.0, 3.0, 1.5}) {
    Vec x = Vec::Zero(q.state_dim());
    Vec u = Vec::Zero(q.input_dim());
    double w = 1.0;
    for (Index k = 0; k <= loop.T_loop; ++k) {
      u += w * loop.inputs[static_cast<size_t>(k)];
      w /= lambda;
      x += w * loop.states[static_cast<size_t>(k + 1)];
    }
    const double nx = x.norm();
    if (nx <= 1e-6 * state_scale) continue;
    if (V_star.distance(x) > tol.eq_abs * scale * nx) continue;

    const Mat psi = base.Q_f + (u - base.Q_f * x) * x.transpose() / (nx * nx);
    const double viol = friend_violation(q, V_star, psi);
    if (viol > tol.eq_abs * scale * std::max(1.0, spectral_norm(psi))) continue;

    ZeroDynamicsWitness wit;
    wit.lambda = Complex(lambda, 0.0);
    wit.v = (x / nx).cast<Complex>();
    normalize_phase(wit.v);
    wit.Q_f = psi;
    wit.restricted_matrix = V_star.basis().transpose() * (q.A + q.B * psi) * V_star.basis();
    wit.residual = ((q.A + q.B * psi).cast<Complex>() * wit.v - wit.lambda * wit.v).norm();
    wit.from_loop = true;
    return wit;
  }
  return std::nullopt;
}

}  // namespace

InvariantSubspaceResult max_output_nulling_subspace(const StateSpaceQuad& q,
                                                    const TolPolicy& tol) {
  q.validate();
  const Index n = q.state_dim();
  const Index r = q.output_dim();
  const Index p = q.input_dim();
  Mat AC(n + r, n);
  AC << q.A, q.C;

  InvariantSubspaceResult out;
  Subspace V = Subspace::full(n);
  for (Index it = 0; it <= n; ++it) {
    out.iterations = it + 1;
    Mat gens = Mat::Zero(n + r, V.dim() + p);
    gens.topLeftCorner(n, V.dim()) = V.basis();
    gens.topRightCorner(n, p) = q.B;
    gens.bottomRightCorner(r, p) = q.D;
    const Subspace target = range_basis(gens, tol);
    Subspace next = subspace_intersect(V, preimage_in(AC, target, tol), tol);
    const bool fixed = next.dim() == V.dim();
    V = std::move(next);
    if (fixed || V.dim() == 0) break;
  }
  out.V_m = V;
  out.V_star = subspace_intersect(V, reachable_subspace(q.A, q.B, tol), tol);
  return out;
}

FriendMatrix friend_matrix(const StateSpaceQuad& q, const Subspace& V, const TolPolicy& tol) {
  q.validate();
  if (V.ambient_dim() != q.state_dim()) {
    fail(ErrorCode::kInvalidInput, "friend_matrix: subspace ambient dimension differs from n_q");
  }
  FriendMatrix out;
  out.Q_f = Mat::Zero(q.input_dim(), q.state_dim());
  if (V.dim() == 0) return out;

  const Mat& X = V.basis();
  const Mat Pc = V.complement_projector();
  Mat G(q.state_dim() + q.output_dim(), q.input_dim());
  G << Pc * q.B, q.D;
  Mat H(q.state_dim() + q.output_dim(), X.cols());
  H << Pc * q.A * X, q.C * X;
  const Mat U = -pseudoinverse(G, tol) * H;
  out.Q_f = U * X.transpose();
  for (Index j = 0; j < X.cols(); ++j) {
    out.residual = std::max(out.residual, (H.col(j) + G * U.col(j)).norm());
  }
  if (out.residual > tol.eq_abs * quad_scale(q)) {
    std::ostringstream msg;
    msg << "friend_matrix: subspace is not output-nulling invariant (residual "
        << out.residual << ")";
    fail(ErrorCode::kNotInvariant, msg.str());
  }
  return out;
}

ZeroDynamicsSearch find_unstable_reachable_zero_dynamics(const StateSpaceQuad& q,
                                                         const TolPolicy& tol) {
  ZeroDynamicsSearch out;
  out.subspaces = max_output_nulling_subspace(q, tol);
  const Subspace& Vs = out.subspaces.V_star;
  out.friend_ = friend_matrix(q, Vs, tol);
  if (Vs.dim() == 0) return out;

  const Mat& X = Vs.basis();
  const Mat closed = q.A + q.B * out.friend_.Q_f;
  const Mat Mr = X.transpose() * closed * X;
  const std::vector<EigenPair> pairs = eigenpairs(Mr);
  size_t best = 0;
  for (size_t i = 1; i < pairs.size(); ++i) {
    if (dominates(pairs[i].lambda, pairs[best].lambda)) best = i;
  }
  out.restricted_spectral_radius = std::abs(pairs[best].lambda);

  if (out.restricted_spectral_radius < 1.0 - tol.unstable_margin) {
    // The friend is unique only for invertible quads; otherwise a zero-output
    // loop realizes an unstable mode on V_star.
    if (!test_invertibility(q, tol).invertible) {
      out.witness = witness_from_loop(q, Vs, out.friend_, tol);
    }
    return out;
  }

  const Complex lambda = pairs[best].lambda;
  const double cutoff = tol.eq_abs * std::max(1.0, spectral_norm(closed));
  const CMat closed_c = closed.cast<Complex>();
  auto residual_of = [&](const CVec& v) { return (closed_c * v - lambda * v).norm(); };

  CVec v = X.cast<Complex>() * pairs[best].v;
  normalize_phase(v);
  if (!(residual_of(v) <= cutoff)) {
    // Defective restriction: take the direction closest to the null space of
    // (M_r - lambda I) instead of the eigensolver's vector.
    const CMat shifted = Mr.cast<Complex>() - lambda * CMat::Identity(Mr.rows(), Mr.cols());
    Eigen::JacobiSVD<CMat> svd(shifted, Eigen::ComputeFullV);
    v = X.cast<Complex>() * svd.matrixV().col(Mr.cols() - 1);
    normalize_phase(v);
    if (!(residual_of(v) <= cutoff)) {
      std::ostringstream msg;
      msg << "zero dynamics: no eigenvector for lambda = " << lambda << " (residual "
          << residual_of(v) << ")";
      fail(ErrorCode::kNumericalFailure, msg.str());
    }
  }

  ZeroDynamicsWitness wit;
  wit.lambda = lambda;
  wit.v = v;
  wit.Q_f = out.friend_.Q_f;
  wit.restricted_matrix = Mr;
  wit.residual = residual_of(v);
  out.witness = std::move(wit);
  return out;
}

}  // namespace cpsvuln
