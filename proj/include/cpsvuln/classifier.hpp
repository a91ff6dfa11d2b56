#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpsvuln/geometry.hpp"
#include "cpsvuln/invertibility.hpp"
#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

enum class VulnerabilityClass {
  kStrictlyVulnerable,
  kVulnerableNotStrictly,
  kInvulnerable,
};

/// "strictly-vulnerable", "vulnerable", "invulnerable".
const char* to_string(VulnerabilityClass c);

/// Unstable eigenvector v of A + B_a Q with C v in span(Gamma_a), reachable
/// for the difference system. Psi = [Q; W] is a friend on that system.
struct GrowthWitness {
  CVec v;
  Complex lambda;
  Mat Q;    ///< p_a x n
  Mat W;    ///< m_a x n
  Mat Psi;  ///< [Q; W]
  bool from_loop = false;
};

struct Diagnostics {
  InvertibilityVerdict strict_test;      ///< on (A, [B_a 0], C, [0 Gamma_a])
  InvertibilityVerdict difference_test;  ///< on the difference system
  Index dim_V_m = 0;
  Index dim_V_star = 0;
  Index subspace_iterations = 0;
  double friend_residual = 0.0;
  double restricted_spectral_radius = 0.0;
  std::optional<Complex> deciding_lambda;
  TolPolicy tol;
  std::vector<std::string> notes;
};

struct VulnerabilityVerdict {
  VulnerabilityClass cls = VulnerabilityClass::kInvulnerable;
  std::optional<ZeroOutputLoop> strict_witness;  ///< on the difference system
  std::optional<GrowthWitness> growth_witness;
  Diagnostics diagnostics;
};

/// Strict test on (A, [B_a 0], C, [0 Gamma_a]), then the zero-dynamics search on the
/// difference system.
VulnerabilityVerdict classify(const PlantLoop& loop, const AttackSurface& surf,
                              const TolPolicy& tol = {});

struct WitnessReport {
  bool valid = false;
  double eigen_residual = 0.0;        ///< ||(A + B_a Q) v - lambda v||
  double span_residual = 0.0;         ///< distance of C v from span(Gamma_a)
  double reach_residual = 0.0;        ///< distance of v from the reachable span
  double output_identity = 0.0;       ///< ||(CA + [C B_a, Gamma_a] Psi) v||
  double state_identity = 0.0;        ///< ||(A_e + B_e Psi) v - lambda v||
  double magnitude_shortfall = 0.0;   ///< max(0, 1 - margin - |lambda|)
  double strict_loop_max_dz = 0.0;    ///< replay of the strict loop, 3 periods
  double max_residual = 0.0;
};

/// Re-evaluates every witness identity independently. Throws kWitnessInvalid
/// when a residual exceeds 10 eq_abs, kPreconditionViolation without witness.
WitnessReport verify_witness(const PlantLoop& loop, const AttackSurface& surf,
                             const VulnerabilityVerdict& verdict, const TolPolicy& tol = {});

}  // namespace cpsvuln
