#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpsvuln/matnum.hpp"
#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

/// T(z) = (zI - A_e)^{-1} B_e, S(z) = C_e T(z) + D_e and R(z) = T(z) S(z)^+ on
/// the grid z_j = e^{2 pi i j / N}.
struct TransferSamples {
  Index N = 0;
  std::vector<Complex> z;
  std::vector<CMat> T, S, R;
};

/// Throws kNumericalFailure when a resolvent solve is ill-conditioned.
TransferSamples sample_transfers(const PlantLoop& loop, const AttackSurface& surf, Index N,
                                 const TolPolicy& tol = {});

struct ImpulseSeries {
  ImpulseCoefficients coeffs;  ///< R_s for s in [-N/2, N/2)
  std::vector<double> norms;   ///< ||R_s||_sp, same indexing
  double tail_mass = 0.0;      ///< sum of norms over |s| >= 3N/8
  double norm_1sp = 0.0;       ///< sum of all norms
};

ImpulseSeries impulse_series(const TransferSamples& samples, const TolPolicy& tol = {});

struct KernelConditionReport {
  std::vector<bool> point_ok;
  bool all_ok = true;
  double worst_ratio = 0.0;  ///< max ||T mu|| / ||T||_sp over kernel vectors of S
};

/// ker T(z_j) must contain ker S(z_j) at every grid point.
KernelConditionReport check_kernel_condition(const TransferSamples& samples,
                                             const TolPolicy& tol = {});

struct BoundReport {
  double r_norm_1sp = 0.0;
  double delta = 1.0;
  double bound = 0.0;  ///< r_norm_1sp * delta
  std::vector<Index> grid_sizes;
  std::vector<double> norms_per_grid;
  double tail_mass = 0.0;
  bool converged = false;
  bool kernel_condition_ok = false;
  double kernel_worst_ratio = 0.0;
  ImpulseSeries impulse;  ///< from the last grid tried
};

inline constexpr Index kMinGrid = 256;
inline constexpr Index kMaxGrid = 65536;

/// Doubles N from 256 until successive norms agree to 1e-4 relative and the
/// tail mass is below 1e-4 of the norm, or N = max_grid.
BoundReport compute_bound(const PlantLoop& loop, const AttackSurface& surf, double delta,
                          const TolPolicy& tol = {}, Index max_grid = kMaxGrid);

struct InnerSample {
  Vec endpoint;               ///< Delta e_T
  double max_de = 0.0;        ///< max_t ||Delta e_t|| over the whole run
  double max_dz = 0.0;        ///< after rescaling (= delta unless the attack is inert)
  std::string source;         ///< "sinusoid" or "random"
};

struct ReachSetEstimate {
  double delta = 1.0;
  Index T = 0;
  Index plane_i = 0, plane_j = 1;
  std::vector<Vec> directions;         ///< unit vectors in R^n inside the chosen plane
  std::vector<double> outer_support;   ///< delta * sum_s ||R_s^T d||
  std::vector<InnerSample> inner;
  BoundReport bound;
};

struct ReachSetOptions {
  double delta = 1.0;
  Index T = 200;
  Index n_dirs = 180;
  Index n_samples = 400;
  std::uint64_t seed = 1;
  Index plane_i = 0, plane_j = 1;
  Index n_freqs = 33;  ///< sinusoid frequencies on [0, pi]
};

/// Outer support from the converged impulse series; inner points from
/// replayed sinusoidal and random attacks rescaled to max ||Delta z|| = delta
/// over the whole run (the run continues past T until the non-causal part of
/// R has decayed).
ReachSetEstimate estimate_reachset(const PlantLoop& loop, const AttackSurface& surf,
                                   const ReachSetOptions& opts, const TolPolicy& tol = {});

struct SinusoidAttack {
  double omega = 0.0;
  CVec mu;               ///< complex input amplitude
  int part = 0;          ///< real (0) or imaginary (1) part of e^{i omega t} mu
  InputSequence attack;  ///< already scaled to max ||Delta z|| = delta
  double max_de = 0.0;
  double max_dz = 0.0;
};

/// Steady-state worst direction: over a frequency grid, mu = S^+ w with w the
/// top right singular vector of R(e^{i omega}); the candidate whose replay
/// over T steps attains the largest max ||Delta e|| is returned.
SinusoidAttack worst_sinusoid_attack(const PlantLoop& loop, const AttackSurface& surf,
                                     double delta, Index T, Index n_freqs = 257,
                                     const TolPolicy& tol = {});

}  // namespace cpsvuln
