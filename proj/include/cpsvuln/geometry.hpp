#pragma once

#include <optional>

#include "cpsvuln/matnum.hpp"
#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

struct InvariantSubspaceResult {
  Subspace V_m;     ///< largest output-nulling controlled invariant subspace
  Subspace V_star;  ///< V_m intersected with the reachable span of (A, B)
  Index iterations = 0;
};

/// V_0 = R^n, V_{k+1} = V_k ∩ {x : [A; C] x ∈ (V_k x {0}) + Im[B; D]}.
InvariantSubspaceResult max_output_nulling_subspace(const StateSpaceQuad& q,
                                                    const TolPolicy& tol = {});

/// Feedback u = Q_f x keeping V invariant with zero output; zero off V.
struct FriendMatrix {
  Mat Q_f;
  double residual = 0.0;
};

/// Throws kNotInvariant when V is not output-nulling controlled invariant.
FriendMatrix friend_matrix(const StateSpaceQuad& q, const Subspace& V, const TolPolicy& tol = {});

struct ZeroDynamicsWitness {
  Complex lambda;
  CVec v;                 ///< unit norm, first nonzero entry real positive
  Mat Q_f;                ///< friend of V_star with (A + B Q_f) v = lambda v
  Mat restricted_matrix;  ///< X^T (A + B Q_f) X for the basis X of V_star
  double residual = 0.0;  ///< ||(A + B Q_f) v - lambda v||
  /// Built from a zero-output loop (non-invertible quads, where the
  /// friend is not unique) instead of the minimum-norm friend's spectrum.
  bool from_loop = false;
};

struct ZeroDynamicsSearch {
  InvariantSubspaceResult subspaces;
  FriendMatrix friend_;
  double restricted_spectral_radius = 0.0;
  std::optional<ZeroDynamicsWitness> witness;
};

/// Largest-|lambda| eigenpair of the restricted zero dynamics on V_star, kept
/// when |lambda| >= 1 - unstable_margin.
ZeroDynamicsSearch find_unstable_reachable_zero_dynamics(const StateSpaceQuad& q,
                                                         const TolPolicy& tol = {});

}  // namespace cpsvuln
