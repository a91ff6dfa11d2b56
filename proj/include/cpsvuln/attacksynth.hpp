#pragma once

#include <optional>

#include "cpsvuln/classifier.hpp"
#include "cpsvuln/invertibility.hpp"
#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

struct StealthBudget {
  double delta = 1.0;  ///< bound on ||Delta z_t||
  bool strict = false;
};

enum class PlanKind {
  kStrictGeometricLoop,
  kEigenGrowth,
  kMarginalGrowth,
};

const char* to_string(PlanKind k);

struct GrowthSpec {
  Complex lambda;
  Mat Psi;  ///< attack_dim x n
  CVec v;   ///< unit norm
};

/// Generator of zeta_t = (u^a_t, y^a_{t+1}). Every emitted input is `scale`
/// times the underlying sequence.
struct AttackPlan {
  PlanKind kind = PlanKind::kEigenGrowth;
  Index state_dim = 0;
  Index attack_dim = 0;

  // Growth plans: the complex sequence starts with reach_inputs (steering the
  // difference state from 0 to v in state_dim steps) and continues with the
  // eigen or marginal recursion; `part` picks the real (0) or imaginary (1) part.
  std::vector<CVec> reach_inputs;
  GrowthSpec growth;
  int part = 0;

  // Strict plans: filtered periodic loop, zeta'_k = sum_{j<growth_terms} c^j zeta_{k-j}.
  std::optional<ZeroOutputLoop> base_loop;
  double growth_base = 1.0;
  Index growth_terms = 1;

  double scale = 1.0;
  Index horizon_hint = 0;

  InputSequence evaluate(Index T) const;
};

/// Requires a strictly vulnerable verdict. Emits the filtered loop whose
/// difference state norm reaches target_norm at step horizon_hint.
AttackPlan synth_strictly_stealthy(const PlantLoop& loop, const AttackSurface& surf,
                                   const VulnerabilityVerdict& verdict, double target_norm);

struct StealthySynthesis {
  AttackPlan plan;
  DeltaTrajectory replay;  ///< over max(horizon, divergence-check length)
  double divergence_ratio = 0.0;  ///< ||De_T|| / ||De_n|| at the check horizon
};

/// Growth along the witness eigenvector, scaled so that the replay over
/// `horizon` steps has max ||Delta z|| = budget.delta.
StealthySynthesis synth_stealthy(const PlantLoop& loop, const AttackSurface& surf,
                                 const GrowthWitness& witness, const StealthBudget& budget,
                                 Index horizon, const TolPolicy& tol = {});

/// Multiplies the plan by delta / replay.max_dz (strict plans unchanged).
AttackPlan rescale_to_budget(const AttackPlan& plan, const DeltaTrajectory& replay,
                             const StealthBudget& budget);

/// Length of the divergence check used by synth_stealthy.
Index divergence_check_horizon(Index n, Complex lambda);

}  // namespace cpsvuln
