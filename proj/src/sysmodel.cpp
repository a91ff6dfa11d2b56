#include "cpsvuln/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "cpsvuln/error.hpp"

namespace cpsvuln {

namespace {

void require_shape(const Mat& m, Index rows, Index cols, const char* field) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << field << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x"
        << m.cols();
    fail(ErrorCode::kInvalidModel, msg.str());
  }
  if (!all_finite(m)) fail(ErrorCode::kInvalidModel, std::string(field) + ": non-finite entries");
}

void require_covariance(const Mat& cov, Index dim, const char* field, const TolPolicy& tol) {
  require_shape(cov, dim, dim, field);
  if (dim == 0) return;
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > tol.eq_abs * scale) {
    fail(ErrorCode::kInvalidModel, std::string(field) + ": not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol.eq_abs * scale) {
    fail(ErrorCode::kInvalidModel, std::string(field) + ": not positive semidefinite");
  }
}

// Symmetric square root factor S with S S^T = cov (cov may be singular).
Mat covariance_factor(const Mat& cov) {
  if (cov.rows() == 0) return cov;
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

void require_attack_length(const InputSequence& attack, Index T, Index dim) {
  if (static_cast<Index>(attack.size()) < T) {
    fail(ErrorCode::kInvalidInput, "attack sequence shorter than the horizon");
  }
  for (Index t = 0; t < T; ++t) {
    if (attack[static_cast<size_t>(t)].size() != dim) {
      std::ostringstream msg;
      msg << "attack input " << t << " has dimension " << attack[static_cast<size_t>(t)].size()
          << ", expected " << dim;
      fail(ErrorCode::kInvalidInput, msg.str());
    }
  }
}

bool beyond_clamp(const Vec& v) {
  return !v.allFinite() || (v.size() > 0 && v.cwiseAbs().maxCoeff() > kDivergenceClamp);
}

}  // namespace

void StateSpaceQuad::validate() const {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() ||
      D.cols() != B.cols()) {
    fail(ErrorCode::kInvalidInput, "state-space quad: incompatible dimensions");
  }
  if (!all_finite(A) || !all_finite(B) || !all_finite(C) || !all_finite(D)) {
    fail(ErrorCode::kInvalidInput, "state-space quad: non-finite entries");
  }
}

void PlantLoop::validate(const TolPolicy& tol) const {
  const Index n = A.rows();
  if (n == 0) fail(ErrorCode::kInvalidModel, "A: empty state matrix");
  require_shape(A, n, n, "A");
  require_shape(B, n, B.cols(), "B");
  require_shape(C, C.rows(), n, "C");
  require_shape(K, n, C.rows(), "K");
  require_shape(L, B.cols(), n, "L");
  require_covariance(W_cov, n, "W_cov", tol);
  require_covariance(V_cov, C.rows(), "V_cov", tol);

  if (reachable_subspace(A, B, tol).dim() != n) {
    fail(ErrorCode::kInvalidModel, "B: (A, B) is not controllable");
  }
  if (reachable_subspace(A.transpose(), C.transpose(), tol).dim() != n) {
    fail(ErrorCode::kInvalidModel, "C: (A, C) is not observable");
  }
  const double rho_ctrl = spectral_radius(A + B * L);
  if (!(rho_ctrl < 1.0)) {
    std::ostringstream msg;
    msg << "L: A+BL is not stable (spectral radius " << rho_ctrl << ")";
    fail(ErrorCode::kInvalidModel, msg.str());
  }
  const double rho_obs = spectral_radius(A - K * C * A);
  if (!(rho_obs < 1.0)) {
    std::ostringstream msg;
    msg << "K: A-KCA is not stable (spectral radius " << rho_obs << ")";
    fail(ErrorCode::kInvalidModel, msg.str());
  }
}

AttackSurface AttackSurface::make(Mat B_a, std::vector<Index> sensors, Index num_outputs) {
  AttackSurface surf;
  surf.B_a = std::move(B_a);
  surf.Gamma_a = Mat::Zero(num_outputs, static_cast<Index>(sensors.size()));
  for (size_t j = 0; j < sensors.size(); ++j) {
    const Index i = sensors[j];
    if (i < 0 || i >= num_outputs) {
      std::ostringstream msg;
      msg << "attacked_sensors: index " << i << " outside [0, " << num_outputs << ")";
      fail(ErrorCode::kInvalidModel, msg.str());
    }
    surf.Gamma_a(i, static_cast<Index>(j)) = 1.0;
  }
  surf.attacked_sensors = std::move(sensors);
  return surf;
}

void AttackSurface::validate(Index n, Index m, const TolPolicy& tol) const {
  if (B_a.cols() > 0) {
    require_shape(B_a, n, B_a.cols(), "B_a");
    if (numerical_rank(B_a, tol) != B_a.cols()) {
      fail(ErrorCode::kInvalidModel, "B_a: not full column rank");
    }
  } else if (B_a.rows() != n && B_a.rows() != 0) {
    fail(ErrorCode::kInvalidModel, "B_a: row count differs from state dimension");
  }
  require_shape(Gamma_a, m, Gamma_a.cols(), "Gamma_a");
  if (static_cast<Index>(attacked_sensors.size()) != Gamma_a.cols()) {
    fail(ErrorCode::kInvalidModel, "attacked_sensors: count differs from Gamma_a columns");
  }
  std::set<Index> seen;
  for (size_t j = 0; j < attacked_sensors.size(); ++j) {
    const Index i = attacked_sensors[j];
    if (i < 0 || i >= m || !seen.insert(i).second) {
      fail(ErrorCode::kInvalidModel, "attacked_sensors: indices must be distinct and in range");
    }
    Vec expected = Vec::Zero(m);
    expected(i) = 1.0;
    if ((Gamma_a.col(static_cast<Index>(j)) - expected).cwiseAbs().maxCoeff() != 0.0) {
      fail(ErrorCode::kInvalidModel, "Gamma_a: columns must be canonical basis vectors");
    }
  }
}

DifferenceSystem build_difference_system(const PlantLoop& loop, const AttackSurface& surf,
                                         const TolPolicy& tol) {
  loop.validate(tol);
  surf.validate(loop.n(), loop.m(), tol);
  const Index n = loop.n();
  const Mat B_a = surf.B_a.cols() == 0 ? Mat(n, 0) : surf.B_a;
  const Mat I_KC = Mat::Identity(n, n) - loop.K * loop.C;

  DifferenceSystem ds;
  ds.quad.A = I_KC * loop.A;
  ds.quad.B.resize(n, surf.attack_dim());
  ds.quad.B << I_KC * B_a, -loop.K * surf.Gamma_a;
  ds.quad.C = loop.C * loop.A;
  ds.quad.D.resize(loop.m(), surf.attack_dim());
  ds.quad.D << loop.C * B_a, surf.Gamma_a;
  ds.loop = loop;
  ds.surface = surf;
  ds.surface.B_a = B_a;
  return ds;
}

StateSpaceQuad build_strict_test_quad(const PlantLoop& loop, const AttackSurface& surf,
                                      const TolPolicy& tol) {
  loop.validate(tol);
  surf.validate(loop.n(), loop.m(), tol);
  const Index n = loop.n();
  const Index p_a = surf.p_a();
  const Index m_a = surf.m_a();
  StateSpaceQuad q;
  q.A = loop.A;
  q.B = Mat::Zero(n, p_a + m_a);
  if (p_a > 0) q.B.leftCols(p_a) = surf.B_a;
  q.C = loop.C;
  q.D = Mat::Zero(loop.m(), p_a + m_a);
  q.D.rightCols(m_a) = surf.Gamma_a;
  return q;
}

DeltaTrajectory simulate_difference(const DifferenceSystem& ds, const InputSequence& attack,
                                    Index T) {
  const StateSpaceQuad& q = ds.quad;
  const PlantLoop& loop = ds.loop;
  require_attack_length(attack, T, q.input_dim());
  const Index n = q.state_dim();
  const Index m = q.output_dim();
  const Mat closed = loop.A + loop.B * loop.L;
  const Mat C_closed = loop.C * closed;

  DeltaTrajectory out;
  out.delta_e.push_back(Vec::Zero(n));
  out.delta_z.push_back(Vec::Zero(m));
  out.delta_xhat.push_back(Vec::Zero(n));
  out.delta_x.push_back(Vec::Zero(n));
  out.delta_y.push_back(Vec::Zero(m));

  for (Index t = 0; t < T; ++t) {
    const Vec& zeta = attack[static_cast<size_t>(t)];
    const Vec& de = out.delta_e.back();
    const Vec& dxh = out.delta_xhat.back();
    Vec dz = q.C * de + q.D * zeta;
    Vec de_next = q.A * de + q.B * zeta;
    Vec dxh_next = closed * dxh + loop.K * dz;
    Vec dy = dz + C_closed * dxh;
    if (beyond_clamp(de_next) || beyond_clamp(dz) || beyond_clamp(dxh_next)) {
      out.diverged = true;
      out.divergence_step = t + 1;
      break;
    }
    Vec dx = dxh_next + de_next;
    out.delta_e.push_back(std::move(de_next));
    out.delta_z.push_back(std::move(dz));
    out.delta_xhat.push_back(std::move(dxh_next));
    out.delta_x.push_back(std::move(dx));
    out.delta_y.push_back(std::move(dy));
  }
  for (const Vec& dz : out.delta_z) out.max_dz = std::max(out.max_dz, dz.norm());
  out.final_de = out.delta_e.back().norm();
  return out;
}

Trajectory simulate_closed_loop(const PlantLoop& loop, const AttackSurface& surf,
                                const InputSequence& attack, const NoiseSpec& noise, Index T) {
  const DifferenceSystem ds = build_difference_system(loop, surf);
  const AttackSurface& s = ds.surface;
  require_attack_length(attack, T, s.attack_dim());
  const Index n = loop.n();
  const Index m = loop.m();
  const Index p_a = s.p_a();
  const Index m_a = s.m_a();

  std::vector<Vec> w(static_cast<size_t>(T + 1), Vec::Zero(n));
  std::vector<Vec> v(static_cast<size_t>(T + 1), Vec::Zero(m));
  if (noise.gaussian) {
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Mat Sw = covariance_factor(loop.W_cov);
    const Mat Sv = covariance_factor(loop.V_cov);
    for (Index t = 0; t <= T; ++t) {
      Vec gv(m), gw(n);
      for (Index i = 0; i < m; ++i) gv(i) = normal(rng);
      for (Index i = 0; i < n; ++i) gw(i) = normal(rng);
      v[static_cast<size_t>(t)] = Sv * gv;
      w[static_cast<size_t>(t)] = Sw * gw;
    }
  }

  Trajectory tr;
  tr.x.push_back(Vec::Zero(n));
  tr.xhat.push_back(Vec::Zero(n));
  tr.y.push_back(loop.C * tr.x[0] + v[0]);
  tr.z.push_back(Vec::Zero(m));
  tr.x_att = tr.x;
  tr.xhat_att = tr.xhat;
  tr.y_att = tr.y;
  tr.z_att = tr.z;

  DeltaTrajectory& d = tr.delta;
  d.delta_e.push_back(Vec::Zero(n));
  d.delta_x.push_back(Vec::Zero(n));
  d.delta_xhat.push_back(Vec::Zero(n));
  d.delta_z.push_back(Vec::Zero(m));
  d.delta_y.push_back(Vec::Zero(m));

  for (Index t = 0; t < T; ++t) {
    const size_t k = static_cast<size_t>(t);
    const Vec& zeta = attack[k];
    const Vec ua = zeta.head(p_a);
    const Vec ya = zeta.tail(m_a);

    // Healthy run.
    const Vec u = loop.L * tr.xhat[k];
    const Vec ax = loop.A * tr.x[k];
    const Vec bu = loop.B * u;
    Vec x_next = ax + bu;
    x_next += w[k];
    const Vec cx = loop.C * x_next;
    Vec y_next = cx + v[k + 1];
    const Vec pred = loop.A * tr.xhat[k] + bu;
    Vec z_next = y_next - loop.C * pred;
    Vec xhat_next = pred + loop.K * z_next;

    // Attacked run; the zero attack adds exact zeros to the same partial sums.
    const Vec u_att = loop.L * tr.xhat_att[k];
    const Vec ax_att = loop.A * tr.x_att[k];
    const Vec bu_att = loop.B * u_att;
    Vec x_att_next = ax_att + bu_att;
    x_att_next += s.B_a * ua;
    x_att_next += w[k];
    const Vec cx_att = loop.C * x_att_next;
    Vec y_att_next = cx_att + s.Gamma_a * ya;
    y_att_next += v[k + 1];
    const Vec pred_att = loop.A * tr.xhat_att[k] + bu_att;
    Vec z_att_next = y_att_next - loop.C * pred_att;
    Vec xhat_att_next = pred_att + loop.K * z_att_next;

    if (beyond_clamp(x_att_next) || beyond_clamp(xhat_att_next) || beyond_clamp(z_att_next)) {
      d.diverged = true;
      d.divergence_step = t + 1;
      break;
    }

    d.delta_x.push_back(x_att_next - x_next);
    d.delta_xhat.push_back(xhat_att_next - xhat_next);
    d.delta_e.push_back((x_att_next - xhat_att_next) - (x_next - xhat_next));
    d.delta_z.push_back(z_att_next - z_next);
    d.delta_y.push_back(y_att_next - y_next);

    tr.x.push_back(std::move(x_next));
    tr.xhat.push_back(std::move(xhat_next));
    tr.y.push_back(std::move(y_next));
    tr.z.push_back(std::move(z_next));
    tr.x_att.push_back(std::move(x_att_next));
    tr.xhat_att.push_back(std::move(xhat_att_next));
    tr.y_att.push_back(std::move(y_att_next));
    tr.z_att.push_back(std::move(z_att_next));
  }
  for (const Vec& dz : d.delta_z) d.max_dz = std::max(d.max_dz, dz.norm());
  d.final_de = d.delta_e.back().norm();
  return tr;
}

double estimator_bias_gain(const PlantLoop& loop) {
  const Mat closed = loop.A + loop.B * loop.L;
  if (!(spectral_radius(closed) < 1.0)) {
    fail(ErrorCode::kInvalidModel, "L: A+BL is not stable");
  }
  Mat term = loop.K;
  double total = 0.0;
  for (int j = 0; j < 1000000; ++j) {
    const double t = spectral_norm(term);
    total += t;
    if (t <= 1e-16 * total) break;
    term = closed * term;
  }
  return total;
}

}  // namespace cpsvuln
