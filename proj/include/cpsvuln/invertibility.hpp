#pragma once

#include <vector>

#include "cpsvuln/matnum.hpp"
#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

/// Block lower-triangular Toeplitz matrix with first block column
/// [D; CB; CAB; ...; CA^{i-1}B]. Depth 0 is D itself.
struct MarkovBlockMatrix {
  Index depth = 0;
  Mat blocks;
};

MarkovBlockMatrix build_markov_matrix(const StateSpaceQuad& q, Index depth);

/// How far the deciding singular values sit from the rank cutoff, as ratios
/// to sigma_max. `smallest_kept` is 1 for rank 0; `largest_dropped` is 0 when
/// nothing was dropped.
struct RankMargin {
  double smallest_kept = 1.0;
  double largest_dropped = 0.0;
};

struct InvertibilityVerdict {
  bool invertible = false;
  Index rank_Mn = 0;
  Index rank_Mn_minus_1 = 0;
  Index input_dim = 0;
  Index defect = 0;  ///< input_dim - (rank_Mn - rank_Mn_minus_1)
  RankMargin margin_Mn;
  RankMargin margin_Mn_minus_1;
};

InvertibilityVerdict test_invertibility(const StateSpaceQuad& q, const TolPolicy& tol = {});

/// (A + K C, B + K D, C, D).
StateSpaceQuad output_injection(const StateSpaceQuad& q, const Mat& K_inj);

/// Nonzero input block u_0..u_T driving the quad from 0 back to 0 with zero
/// output. Repeating the block keeps the output at zero forever.
struct ZeroOutputLoop {
  Index T_loop = 0;
  std::vector<Vec> inputs;  ///< u_0..u_T, ||u_0|| = 1
  std::vector<Vec> states;  ///< x_0 = 0, x_1, ..., x_{T+1} (the last one ~ 0)
  double output_residual = 0.0;  ///< max_k ||y_k||
  double return_residual = 0.0;  ///< ||x_{T+1}||

  Index length() const { return static_cast<Index>(inputs.size()); }
  /// Input at time k of the periodic extension.
  const Vec& input_at(Index k) const { return inputs[static_cast<size_t>(k % length())]; }
};

/// Searches T = 1..4 n_q. Throws kPreconditionViolation for invertible quads
/// and kSearchExhausted when no loop is found.
ZeroOutputLoop find_zero_output_loop(const StateSpaceQuad& q, const TolPolicy& tol = {});

}  // namespace cpsvuln
