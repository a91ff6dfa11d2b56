#include "cpsvuln/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cpsvuln/error.hpp"

namespace cpsvuln {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
  fail(ErrorCode::kInvalidModel, path + ": " + what);
}

Mat read_matrix(const json& j, const std::string& path) {
  if (!j.is_array()) bad_field(path, "expected an array of rows");
  const Index rows = static_cast<Index>(j.size());
  Index cols = -1;
  Mat m;
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array()) bad_field(rp, "expected a row array");
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Index>(row.size()) != cols) {
      bad_field(rp, "ragged row");
    }
    for (Index c = 0; c < cols; ++c) {
      const json& x = row[static_cast<size_t>(c)];
      if (!x.is_number()) bad_field(rp + "[" + std::to_string(c) + "]", "expected a number");
      m(r, c) = x.get<double>();
    }
  }
  if (rows == 0) m.resize(0, 0);
  if (!all_finite(m)) bad_field(path, "non-finite entry");
  return m;
}

const json& required(const json& root, const char* key) {
  if (!root.contains(key)) bad_field(key, "missing required field");
  return root.at(key);
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParseError, std::string("scenario: ") + e.what());
  }
  if (!root.is_object()) fail(ErrorCode::kParseError, "scenario: top level must be an object");

  Scenario sc;
  if (root.contains("name")) {
    if (!root["name"].is_string()) bad_field("name", "expected a string");
    sc.name = root["name"].get<std::string>();
  }
  PlantLoop& loop = sc.loop;
  loop.A = read_matrix(required(root, "A"), "A");
  loop.B = read_matrix(required(root, "B"), "B");
  loop.C = read_matrix(required(root, "C"), "C");
  loop.K = read_matrix(required(root, "K"), "K");
  loop.L = read_matrix(required(root, "L"), "L");
  const Index n = loop.A.rows();
  const Index m = loop.C.rows();
  loop.W_cov = root.contains("W_cov") ? read_matrix(root["W_cov"], "W_cov") : Mat::Identity(n, n);
  loop.V_cov = root.contains("V_cov") ? read_matrix(root["V_cov"], "V_cov") : Mat::Identity(m, m);

  Mat B_a(n, 0);
  if (root.contains("B_a") && !root["B_a"].is_null()) {
    B_a = read_matrix(root["B_a"], "B_a");
    if (B_a.size() == 0) B_a.resize(n, 0);
  }
  std::vector<Index> sensors;
  if (root.contains("attacked_sensors")) {
    const json& s = root["attacked_sensors"];
    if (!s.is_array()) bad_field("attacked_sensors", "expected an array of indices");
    for (size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_integer()) {
        bad_field("attacked_sensors[" + std::to_string(i) + "]", "expected an integer");
      }
      sensors.push_back(s[i].get<Index>());
    }
  }

  if (root.contains("delta")) {
    if (!root["delta"].is_number()) bad_field("delta", "expected a number");
    sc.delta = root["delta"].get<double>();
    if (!(sc.delta > 0.0) || !std::isfinite(sc.delta)) bad_field("delta", "must be positive");
  }
  if (root.contains("horizon")) {
    if (!root["horizon"].is_number_integer() || root["horizon"].get<long long>() < 1) {
      bad_field("horizon", "expected a positive integer");
    }
    sc.horizon = root["horizon"].get<Index>();
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) bad_field("seed", "expected a non-negative integer");
    sc.seed = root["seed"].get<std::uint64_t>();
  }

  loop.validate();
  sc.surface = AttackSurface::make(std::move(B_a), std::move(sensors), m);
  sc.surface.validate(n, m);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  Scenario sc = parse_scenario(buf.str());
  if (sc.name.empty()) sc.name = path;
  return sc;
}

}  // namespace cpsvuln
