#pragma once

#include <cstdint>
#include <vector>

#include "cpsvuln/matnum.hpp"

namespace cpsvuln {

/// x_{k+1} = A x_k + B u_k,  y_k = C x_k + D u_k.
struct StateSpaceQuad {
  Mat A, B, C, D;

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
  Index output_dim() const { return C.rows(); }

  /// Throws kInvalidInput on incompatible shapes or non-finite entries.
  void validate() const;
};

/// Plant, Luenberger observer gain K and state-feedback gain L.
struct PlantLoop {
  Mat A, B, C;
  Mat K;      ///< n x m
  Mat L;      ///< p x n
  Mat W_cov;  ///< process noise covariance, n x n
  Mat V_cov;  ///< measurement noise covariance, m x m

  Index n() const { return A.rows(); }
  Index p() const { return B.cols(); }
  Index m() const { return C.rows(); }

  /// Shape, observability, controllability, gain stability and covariance
  /// checks. Throws kInvalidModel naming the offending field.
  void validate(const TolPolicy& tol = {}) const;
};

/// Which actuators (through B_a) and which sensors the adversary controls.
struct AttackSurface {
  Mat B_a;      ///< n x p_a, full column rank (p_a may be 0)
  Mat Gamma_a;  ///< m x m_a, columns are distinct canonical basis vectors
  std::vector<Index> attacked_sensors;  ///< 0-based, order matches Gamma_a columns

  Index p_a() const { return B_a.cols(); }
  Index m_a() const { return Gamma_a.cols(); }
  Index attack_dim() const { return p_a() + m_a(); }

  /// Builds Gamma_a from sensor indices.
  static AttackSurface make(Mat B_a, std::vector<Index> sensors, Index num_outputs);

  void validate(Index n, Index m, const TolPolicy& tol = {}) const;
};

/// Dynamics of (Delta e, Delta z) driven by zeta_t = (u^a_t, y^a_{t+1}).
struct DifferenceSystem {
  StateSpaceQuad quad;
  PlantLoop loop;
  AttackSurface surface;
};

DifferenceSystem build_difference_system(const PlantLoop& loop, const AttackSurface& surf,
                                         const TolPolicy& tol = {});

/// (A, [B_a 0], C, [0 Gamma_a]): non-invertible exactly when the loop is
/// strictly vulnerable.
StateSpaceQuad build_strict_test_quad(const PlantLoop& loop, const AttackSurface& surf,
                                      const TolPolicy& tol = {});

using InputSequence = std::vector<Vec>;

/// States are frozen once any tracked quantity exceeds this magnitude.
inline constexpr double kDivergenceClamp = 1e12;

/// Difference-variable history; index t runs over 0..horizon.
struct DeltaTrajectory {
  std::vector<Vec> delta_e;
  std::vector<Vec> delta_z;
  std::vector<Vec> delta_xhat;
  std::vector<Vec> delta_x;
  std::vector<Vec> delta_y;

  double max_dz = 0.0;    ///< sup_t ||Delta z_t||
  double final_de = 0.0;  ///< ||Delta e_T|| at the last recorded step
  bool diverged = false;
  Index divergence_step = -1;

  Index horizon() const { return static_cast<Index>(delta_e.size()) - 1; }
  double de_norm(Index t) const { return delta_e[static_cast<size_t>(t)].norm(); }
  double dz_norm(Index t) const { return delta_z[static_cast<size_t>(t)].norm(); }
};

/// Deterministic replay of an attack on the difference system. Stops early
/// (with `diverged` set) when a magnitude crosses kDivergenceClamp.
DeltaTrajectory simulate_difference(const DifferenceSystem& ds, const InputSequence& attack,
                                    Index T);

struct NoiseSpec {
  std::uint64_t seed = 0;
  bool gaussian = false;
};

/// Healthy and attacked closed-loop runs sharing one noise realization.
struct Trajectory {
  std::vector<Vec> x, xhat, y, z;
  std::vector<Vec> x_att, xhat_att, y_att, z_att;
  DeltaTrajectory delta;  ///< attacked minus healthy
};

Trajectory simulate_closed_loop(const PlantLoop& loop, const AttackSurface& surf,
                                const InputSequence& attack, const NoiseSpec& noise, Index T);

/// sum_j ||(A + B L)^j K||_sp; bounds ||Delta xhat_t|| by this times sup ||Delta z||.
double estimator_bias_gain(const PlantLoop& loop);

}  // namespace cpsvuln
