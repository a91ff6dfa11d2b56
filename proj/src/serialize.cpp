#include "cpsvuln/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "cpsvuln/error.hpp"

namespace cpsvuln {

namespace {

using nlohmann::json;

json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_json(const Vec& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

json complex_json(Complex c) { return {{"re", num(c.real())}, {"im", num(c.imag())}}; }

json rank_json(const InvertibilityVerdict& v) {
  return {{"invertible", v.invertible},
          {"rank_Mn", v.rank_Mn},
          {"rank_Mn_minus_1", v.rank_Mn_minus_1},
          {"input_dim", v.input_dim},
          {"defect", v.defect},
          {"margin_Mn", {{"smallest_kept", num(v.margin_Mn.smallest_kept)},
                         {"largest_dropped", num(v.margin_Mn.largest_dropped)}}},
          {"margin_Mn_minus_1", {{"smallest_kept", num(v.margin_Mn_minus_1.smallest_kept)},
                                 {"largest_dropped", num(v.margin_Mn_minus_1.largest_dropped)}}}};
}

[[noreturn]] void bad_plan(const std::string& what) {
  fail(ErrorCode::kParseError, "attack file: " + what);
}

const json& need(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad_plan(std::string("missing field '") + key + "'");
  return j.at(key);
}

double read_num(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
  }
  bad_plan(what + " must be a number");
}

Mat read_mat(const json& j, const std::string& what) {
  if (!j.is_array()) bad_plan(what + " must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 && j[0].is_array() ? static_cast<Index>(j[0].size()) : 0;
  Mat m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) bad_plan(what + " is ragged");
    for (Index c = 0; c < cols; ++c) m(r, c) = read_num(row[static_cast<size_t>(c)], what);
  }
  return m;
}

Vec read_vec(const json& j, const std::string& what) {
  if (!j.is_array()) bad_plan(what + " must be an array");
  Vec v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = read_num(j[static_cast<size_t>(i)], what);
  return v;
}

Index read_index(const json& j, const std::string& what) {
  if (!j.is_number_integer()) bad_plan(what + " must be an integer");
  return j.get<Index>();
}

void csv_row(std::ostringstream& out, const std::vector<double>& values) {
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << format_double(values[i]);
  }
  out << '\n';
}

void header_block(std::vector<std::string>& h, const std::string& prefix, Index n) {
  for (Index i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
}

void append(std::vector<double>& row, const Vec& v) {
  for (Index i = 0; i < v.size(); ++i) row.push_back(v(i));
}

std::string join(const std::vector<std::string>& h) {
  std::string s;
  for (size_t i = 0; i < h.size(); ++i) {
    if (i) s += ',';
    s += h[i];
  }
  return s + '\n';
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string verdict_to_json(const std::string& scenario_name, const VulnerabilityVerdict& v) {
  const Diagnostics& d = v.diagnostics;
  json j;
  j["scenario"] = scenario_name;
  j["class"] = to_string(v.cls);
  json diag;
  diag["strict_test"] = rank_json(d.strict_test);
  diag["difference_test"] = rank_json(d.difference_test);
  diag["dim_V_m"] = d.dim_V_m;
  diag["dim_V_star"] = d.dim_V_star;
  diag["subspace_iterations"] = d.subspace_iterations;
  diag["friend_residual"] = num(d.friend_residual);
  diag["restricted_spectral_radius"] = num(d.restricted_spectral_radius);
  diag["deciding_lambda"] = d.deciding_lambda ? complex_json(*d.deciding_lambda) : json(nullptr);
  diag["tolerances"] = {{"rank_rel", d.tol.rank_rel},
                        {"eq_abs", d.tol.eq_abs},
                        {"unstable_margin", d.tol.unstable_margin}};
  diag["notes"] = d.notes;
  j["diagnostics"] = diag;

  if (v.strict_witness) {
    const ZeroOutputLoop& lp = *v.strict_witness;
    json inputs = json::array();
    for (const Vec& u : lp.inputs) inputs.push_back(vec_json(u));
    j["strict_witness"] = {{"T_loop", lp.T_loop},
                           {"inputs", inputs},
                           {"output_residual", num(lp.output_residual)},
                           {"return_residual", num(lp.return_residual)}};
  } else {
    j["strict_witness"] = nullptr;
  }
  if (v.growth_witness) {
    const GrowthWitness& w = *v.growth_witness;
    j["growth_witness"] = {{"lambda", complex_json(w.lambda)},
                       {"v_re", vec_json(w.v.real())},
                       {"v_im", vec_json(w.v.imag())},
                       {"Q", mat_json(w.Q)},
                       {"W", mat_json(w.W)},
                       {"from_loop", w.from_loop}};
  } else {
    j["growth_witness"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string bound_to_json(const std::string& scenario_name, const BoundReport& b) {
  json j;
  j["scenario"] = scenario_name;
  j["converged"] = b.converged;
  j["r_norm_1sp"] = num(b.r_norm_1sp);
  j["delta"] = num(b.delta);
  j["bound"] = num(b.bound);
  j["tail_mass"] = num(b.tail_mass);
  j["kernel_condition_ok"] = b.kernel_condition_ok;
  j["kernel_worst_ratio"] = num(b.kernel_worst_ratio);
  j["grid_sizes"] = b.grid_sizes;
  json norms = json::array();
  for (double x : b.norms_per_grid) norms.push_back(num(x));
  j["norms_per_grid"] = norms;
  return j.dump(2) + "\n";
}

std::string plan_to_json(const AttackPlan& plan) {
  json j;
  j["kind"] = to_string(plan.kind);
  j["state_dim"] = plan.state_dim;
  j["attack_dim"] = plan.attack_dim;
  j["scale"] = num(plan.scale);
  j["horizon_hint"] = plan.horizon_hint;
  j["part"] = plan.part == 0 ? "real" : "imag";
  json re = json::array(), im = json::array();
  for (const CVec& c : plan.reach_inputs) {
    re.push_back(vec_json(c.real()));
    im.push_back(vec_json(c.imag()));
  }
  j["reach_inputs"] = re;
  j["reach_inputs_im"] = im;
  if (plan.kind == PlanKind::kStrictGeometricLoop) {
    j["growth"] = nullptr;
  } else {
    j["growth"] = {{"lambda_re", num(plan.growth.lambda.real())},
                   {"lambda_im", num(plan.growth.lambda.imag())},
                   {"Psi", mat_json(plan.growth.Psi)},
                   {"v_re", vec_json(plan.growth.v.real())},
                   {"v_im", vec_json(plan.growth.v.imag())},
                   {"eps", num(plan.scale)}};
  }
  if (plan.base_loop) {
    json inputs = json::array(), states = json::array();
    for (const Vec& u : plan.base_loop->inputs) inputs.push_back(vec_json(u));
    for (const Vec& x : plan.base_loop->states) states.push_back(vec_json(x));
    j["base_loop"] = {{"inputs", inputs}, {"states", states}};
  } else {
    j["base_loop"] = nullptr;
  }
  j["growth_base"] = num(plan.growth_base);
  j["growth_terms"] = plan.growth_terms;
  return j.dump(2) + "\n";
}

AttackPlan plan_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bad_plan(e.what());
  }
  if (!j.is_object()) bad_plan("top level must be an object");
  AttackPlan plan;
  const json& kind = need(j, "kind");
  if (!kind.is_string()) bad_plan("kind must be a string");
  const std::string k = kind.get<std::string>();
  if (k == to_string(PlanKind::kStrictGeometricLoop)) {
    plan.kind = PlanKind::kStrictGeometricLoop;
  } else if (k == to_string(PlanKind::kEigenGrowth)) {
    plan.kind = PlanKind::kEigenGrowth;
  } else if (k == to_string(PlanKind::kMarginalGrowth)) {
    plan.kind = PlanKind::kMarginalGrowth;
  } else {
    bad_plan("unknown kind '" + k + "'");
  }
  plan.state_dim = read_index(need(j, "state_dim"), "state_dim");
  plan.attack_dim = read_index(need(j, "attack_dim"), "attack_dim");
  plan.scale = read_num(need(j, "scale"), "scale");
  if (j.contains("horizon_hint")) plan.horizon_hint = read_index(j["horizon_hint"], "horizon_hint");
  if (j.contains("part")) {
    const json& p = j["part"];
    if (!p.is_string() || (p != "real" && p != "imag")) bad_plan("part must be 'real' or 'imag'");
    plan.part = p == "real" ? 0 : 1;
  }
  if (plan.state_dim < 0 || plan.attack_dim < 0) bad_plan("dimensions must be non-negative");

  if (plan.kind == PlanKind::kStrictGeometricLoop) {
    const json& bl = need(j, "base_loop");
    const json& inputs = need(bl, "inputs");
    if (!inputs.is_array() || inputs.empty()) bad_plan("base_loop.inputs must be a non-empty array");
    ZeroOutputLoop lp;
    for (const json& u : inputs) {
      lp.inputs.push_back(read_vec(u, "base_loop.inputs"));
      if (lp.inputs.back().size() != plan.attack_dim) bad_plan("base_loop input has wrong size");
    }
    lp.T_loop = lp.length() - 1;
    if (bl.contains("states")) {
      for (const json& x : bl["states"]) lp.states.push_back(read_vec(x, "base_loop.states"));
    }
    plan.base_loop = std::move(lp);
    plan.growth_base = read_num(need(j, "growth_base"), "growth_base");
    plan.growth_terms = read_index(need(j, "growth_terms"), "growth_terms");
    if (plan.growth_terms < 1) bad_plan("growth_terms must be >= 1");
    return plan;
  }

  const json& re = need(j, "reach_inputs");
  if (!re.is_array() || static_cast<Index>(re.size()) != plan.state_dim) {
    bad_plan("reach_inputs must hold state_dim vectors");
  }
  const json* im = j.contains("reach_inputs_im") ? &j["reach_inputs_im"] : nullptr;
  if (im && (!im->is_array() || im->size() != re.size())) bad_plan("reach_inputs_im size mismatch");
  for (size_t i = 0; i < re.size(); ++i) {
    const Vec r = read_vec(re[i], "reach_inputs");
    const Vec m = im ? read_vec((*im)[i], "reach_inputs_im") : Vec::Zero(r.size());
    if (r.size() != plan.attack_dim || m.size() != plan.attack_dim) {
      bad_plan("reach input has wrong size");
    }
    CVec c(r.size());
    c.real() = r;
    c.imag() = m;
    plan.reach_inputs.push_back(std::move(c));
  }
  const json& g = need(j, "growth");
  plan.growth.lambda = Complex(read_num(need(g, "lambda_re"), "lambda_re"),
                               read_num(need(g, "lambda_im"), "lambda_im"));
  plan.growth.Psi = read_mat(need(g, "Psi"), "Psi");
  const Vec vr = read_vec(need(g, "v_re"), "v_re");
  const Vec vi = read_vec(need(g, "v_im"), "v_im");
  if (vr.size() != plan.state_dim || vi.size() != plan.state_dim ||
      plan.growth.Psi.rows() != plan.attack_dim || plan.growth.Psi.cols() != plan.state_dim) {
    bad_plan("growth shapes do not match state_dim/attack_dim");
  }
  plan.growth.v.resize(plan.state_dim);
  plan.growth.v.real() = vr;
  plan.growth.v.imag() = vi;
  return plan;
}

std::string delta_trajectory_csv(const DeltaTrajectory& tr) {
  const Index n = tr.delta_e.empty() ? 0 : tr.delta_e[0].size();
  const Index m = tr.delta_z.empty() ? 0 : tr.delta_z[0].size();
  std::vector<std::string> h = {"t", "de_norm", "dz_norm"};
  header_block(h, "de_", n);
  header_block(h, "dz_", m);
  std::ostringstream out;
  out << join(h);
  for (Index t = 0; t <= tr.horizon(); ++t) {
    std::vector<double> row = {static_cast<double>(t), tr.de_norm(t), tr.dz_norm(t)};
    append(row, tr.delta_e[static_cast<size_t>(t)]);
    append(row, tr.delta_z[static_cast<size_t>(t)]);
    csv_row(out, row);
  }
  return out.str();
}

std::string closed_loop_csv(const Trajectory& tr) {
  const DeltaTrajectory& d = tr.delta;
  const Index n = tr.x.empty() ? 0 : tr.x[0].size();
  const Index m = tr.z.empty() ? 0 : tr.z[0].size();
  std::vector<std::string> h = {"t"};
  header_block(h, "x_", n);
  header_block(h, "xhat_", n);
  header_block(h, "x_att_", n);
  header_block(h, "xhat_att_", n);
  header_block(h, "z_", m);
  header_block(h, "z_att_", m);
  header_block(h, "de_", n);
  header_block(h, "dz_", m);
  h.push_back("de_norm");
  h.push_back("dz_norm");
  std::ostringstream out;
  out << join(h);
  for (size_t t = 0; t < tr.x_att.size(); ++t) {
    std::vector<double> row = {static_cast<double>(t)};
    append(row, tr.x[t]);
    append(row, tr.xhat[t]);
    append(row, tr.x_att[t]);
    append(row, tr.xhat_att[t]);
    append(row, tr.z[t]);
    append(row, tr.z_att[t]);
    append(row, d.delta_e[t]);
    append(row, d.delta_z[t]);
    row.push_back(d.delta_e[t].norm());
    row.push_back(d.delta_z[t].norm());
    csv_row(out, row);
  }
  return out.str();
}

std::vector<Vec> support_polygon(const ReachSetEstimate& est) {
  std::vector<Vec> verts;
  const size_t K = est.directions.size();
  if (K < 3) return verts;
  for (size_t k = 0; k < K; ++k) {
    const Vec& a = est.directions[k];
    const Vec& b = est.directions[(k + 1) % K];
    Eigen::Matrix2d M;
    M << a(est.plane_i), a(est.plane_j), b(est.plane_i), b(est.plane_j);
    const Eigen::Vector2d h(est.outer_support[k], est.outer_support[(k + 1) % K]);
    verts.push_back(M.fullPivLu().solve(h));
  }
  return verts;
}

std::string reachset_csv(const ReachSetEstimate& est) {
  std::ostringstream out;
  out << "kind,index,p_i,p_j,norm,max_de\n";
  for (size_t k = 0; k < est.inner.size(); ++k) {
    const InnerSample& s = est.inner[k];
    out << "inner," << k << ',' << format_double(s.endpoint(est.plane_i)) << ','
        << format_double(s.endpoint(est.plane_j)) << ',' << format_double(s.endpoint.norm()) << ','
        << format_double(s.max_de) << '\n';
  }
  for (size_t k = 0; k < est.directions.size(); ++k) {
    const Vec p = est.outer_support[k] * est.directions[k];
    out << "support," << k << ',' << format_double(p(est.plane_i)) << ','
        << format_double(p(est.plane_j)) << ',' << format_double(est.outer_support[k]) << ",\n";
  }
  const std::vector<Vec> verts = support_polygon(est);
  for (size_t k = 0; k < verts.size(); ++k) {
    out << "vertex," << k << ',' << format_double(verts[k](0)) << ','
        << format_double(verts[k](1)) << ',' << format_double(verts[k].norm()) << ",\n";
  }
  return out.str();
}

std::string reachset_to_json(const std::string& scenario_name, const ReachSetEstimate& est) {
  double max_norm = 0.0, max_de = 0.0, worst_support = 0.0;
  for (const InnerSample& s : est.inner) {
    max_norm = std::max(max_norm, s.endpoint.norm());
    max_de = std::max(max_de, s.max_de);
    for (size_t k = 0; k < est.directions.size(); ++k) {
      const double h = est.outer_support[k];
      if (h > 0) worst_support = std::max(worst_support, s.endpoint.dot(est.directions[k]) / h);
    }
  }
  json j;
  j["scenario"] = scenario_name;
  j["delta"] = num(est.delta);
  j["T"] = est.T;
  j["plane"] = {est.plane_i, est.plane_j};
  j["bound"] = num(est.bound.bound);
  j["r_norm_1sp"] = num(est.bound.r_norm_1sp);
  j["converged"] = est.bound.converged;
  j["inner_points"] = est.inner.size();
  j["directions"] = est.directions.size();
  j["max_endpoint_norm"] = num(max_norm);
  j["max_de_over_runs"] = num(max_de);
  j["bound_ratio"] = num(est.bound.bound > 0 ? max_de / est.bound.bound : 0.0);
  j["worst_support_ratio"] = num(worst_support);
  return j.dump(2) + "\n";
}

}  // namespace cpsvuln
