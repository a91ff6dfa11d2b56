#pragma once

#include <string>
#include <vector>

#include "cpsvuln/attacksynth.hpp"
#include "cpsvuln/classifier.hpp"
#include "cpsvuln/freqbound.hpp"
#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

std::string verdict_to_json(const std::string& scenario_name, const VulnerabilityVerdict& v);
std::string bound_to_json(const std::string& scenario_name, const BoundReport& b);

/// Attack file: {kind, state_dim, attack_dim, scale, horizon_hint, part,
/// reach_inputs, reach_inputs_im, growth, base_loop, growth_base, growth_terms}.
std::string plan_to_json(const AttackPlan& plan);
/// Throws kParseError on malformed text or missing fields.
AttackPlan plan_from_json(const std::string& text);

/// t, de_norm, dz_norm, de_0.., dz_0..
std::string delta_trajectory_csv(const DeltaTrajectory& tr);
/// t, x_*, xhat_*, x_att_*, xhat_att_*, z_*, z_att_*, de_*, dz_*, de_norm, dz_norm
std::string closed_loop_csv(const Trajectory& tr);

/// Vertices of the polygon {p : <p, d_k> <= h_k}, projected on the plane.
std::vector<Vec> support_polygon(const ReachSetEstimate& est);

/// kind, index, p_i, p_j, norm, max_de; kind is "inner", "support" or "vertex".
std::string reachset_csv(const ReachSetEstimate& est);
std::string reachset_to_json(const std::string& scenario_name, const ReachSetEstimate& est);

/// Fixed formatting used by every CSV and JSON writer in the library.
std::string format_double(double x);

}  // namespace cpsvuln
