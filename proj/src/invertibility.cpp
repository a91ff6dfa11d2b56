#include "cpsvuln/invertibility.hpp"

#include <algorithm>
#include <sstream>

#include "cpsvuln/error.hpp"

namespace cpsvuln {

namespace {

RankMargin rank_margin(const Mat& m, Index rank) {
  RankMargin out;
  if (m.size() == 0) return out;
  const Vec sv = Eigen::JacobiSVD<Mat>(m).singularValues();
  if (sv(0) == 0.0) return out;
  if (rank > 0) out.smallest_kept = sv(rank - 1) / sv(0);
  if (rank < sv.size()) out.largest_dropped = sv(rank) / sv(0);
  return out;
}

// Maps the stacked inputs (u_0, ..., u_T) to x_{T+1}: [A^T B, ..., A B, B].
Mat final_state_map(const StateSpaceQuad& q, Index T) {
  const Index n = q.state_dim();
  const Index p = q.input_dim();
  Mat phi(n, (T + 1) * p);
  Mat block = q.B;
  for (Index k = T; k >= 0; --k) {
    phi.middleCols(k * p, p) = block;
    block = q.A * block;
  }
  return phi;
}

double quad_scale(const StateSpaceQuad& q) {
  Mat sys(q.state_dim() + q.output_dim(), q.state_dim() + q.input_dim());
  sys << q.A, q.B, q.C, q.D;
  return std::max(1.0, spectral_norm(sys));
}

}  // namespace

MarkovBlockMatrix build_markov_matrix(const StateSpaceQuad& q, Index depth) {
  q.validate();
  if (depth < 0) fail(ErrorCode::kInvalidInput, "build_markov_matrix: negative depth");
  const Index r = q.output_dim();
  const Index p = q.input_dim();
  // markov[0] = D, markov[k] = C A^{k-1} B.
  std::vector<Mat> markov;
  markov.push_back(q.D);
  Mat AkB = q.B;
  for (Index k = 1; k <= depth; ++k) {
    markov.push_back(q.C * AkB);
    AkB = q.A * AkB;
  }
  MarkovBlockMatrix out;
  out.depth = depth;
  out.blocks = Mat::Zero((depth + 1) * r, (depth + 1) * p);
  for (Index row = 0; row <= depth; ++row) {
    for (Index col = 0; col <= row; ++col) {
      out.blocks.block(row * r, col * p, r, p) = markov[static_cast<size_t>(row - col)];
    }
  }
  return out;
}

InvertibilityVerdict test_invertibility(const StateSpaceQuad& q, const TolPolicy& tol) {
  q.validate();
  const Index n = q.state_dim();
  InvertibilityVerdict v;
  v.input_dim = q.input_dim();
  const Mat Mn = build_markov_matrix(q, n).blocks;
  v.rank_Mn = numerical_rank(Mn, tol);
  v.margin_Mn = rank_margin(Mn, v.rank_Mn);
  if (n >= 1) {
    const Mat Mn1 = build_markov_matrix(q, n - 1).blocks;
    v.rank_Mn_minus_1 = numerical_rank(Mn1, tol);
    v.margin_Mn_minus_1 = rank_margin(Mn1, v.rank_Mn_minus_1);
  }
  v.defect = v.input_dim - (v.rank_Mn - v.rank_Mn_minus_1);
  v.invertible = v.defect == 0;
  return v;
}

StateSpaceQuad output_injection(const StateSpaceQuad& q, const Mat& K_inj) {
  q.validate();
  if (K_inj.rows() != q.state_dim() || K_inj.cols() != q.output_dim()) {
    fail(ErrorCode::kInvalidInput, "output_injection: gain must be n_q x r");
  }
  StateSpaceQuad out = q;
  out.A = q.A + K_inj * q.C;
  out.B = q.B + K_inj * q.D;
  return out;
}

ZeroOutputLoop find_zero_output_loop(const StateSpaceQuad& q, const TolPolicy& tol) {
  const InvertibilityVerdict verdict = test_invertibility(q, tol);
  if (verdict.invertible) {
    fail(ErrorCode::kPreconditionViolation, "find_zero_output_loop: quad is invertible");
  }
  const Index n = q.state_dim();
  const Index p = q.input_dim();
  const double scale = quad_scale(q);

  for (Index T = 1; T <= std::max<Index>(4 * n, 1); ++T) {
    const Mat M = build_markov_matrix(q, T).blocks;
    const Mat phi = final_state_map(q, T);
    Mat stacked(M.rows() + phi.rows(), M.cols());
    stacked << M, phi;
    const Subspace ker = kernel_basis(stacked, tol);
    if (ker.dim() == 0) continue;

    // Kernel element with the largest leading input.
    const Mat lead = ker.basis().topRows(p);
    Eigen::JacobiSVD<Mat> svd(lead, Eigen::ComputeFullV);
    const double sigma = svd.singularValues()(0);
    if (sigma <= 1e-6) continue;
    Vec stacked_u = ker.basis() * svd.matrixV().col(0) / sigma;
    const Vec u0 = stacked_u.head(p);
    for (Index i = 0; i < p; ++i) {
      if (std::abs(u0(i)) > 1e-9) {
        if (u0(i) < 0) stacked_u = -stacked_u;
        break;
      }
    }

    ZeroOutputLoop loop;
    loop.T_loop = T;
    Vec x = Vec::Zero(n);
    loop.states.push_back(x);
    double input_scale = 1.0;
    for (Index k = 0; k <= T; ++k) {
      Vec u = stacked_u.segment(k * p, p);
      input_scale = std::max(input_scale, u.norm());
      loop.output_residual = std::max(loop.output_residual, (q.C * x + q.D * u).norm());
      x = q.A * x + q.B * u;
      loop.states.push_back(x);
      loop.inputs.push_back(std::move(u));
    }
    loop.return_residual = x.norm();
    const double cutoff = tol.eq_abs * scale * input_scale;
    if (loop.output_residual <= cutoff && loop.return_residual <= cutoff) return loop;
  }
  std::ostringstream msg;
  msg << "find_zero_output_loop: no loop up to T = " << 4 * n
      << " (defect " << verdict.defect << "); check rank tolerance";
  fail(ErrorCode::kSearchExhausted, msg.str());
}

}  // namespace cpsvuln
