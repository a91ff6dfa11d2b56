#pragma once

#include <string>

#include "cpsvuln/freqbound.hpp"
#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

/// ||Delta e_t|| (top panel, log scale when `log_de`) and ||Delta z_t||
/// (bottom panel) against t.
std::string svg_delta_plot(const DeltaTrajectory& tr, const std::string& title, bool log_de);

/// Inner points, support polygon and bound circle on the chosen plane.
std::string svg_reachset_plot(const ReachSetEstimate& est, const std::string& title);

}  // namespace cpsvuln
