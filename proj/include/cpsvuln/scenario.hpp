#pragma once

#include <cstdint>
#include <string>

#include "cpsvuln/sysmodel.hpp"

namespace cpsvuln {

/// Parsed scenario file. Matrices are arrays of row arrays; attacked sensor
/// indices are 0-based.
struct Scenario {
  std::string name;
  PlantLoop loop;
  AttackSurface surface;
  double delta = 1.0;
  Index horizon = 400;
  std::uint64_t seed = 0;
};

/// Throws kParseError for malformed JSON and kInvalidModel (message starts
/// with the field path) for schema or model violations.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

}  // namespace cpsvuln
