// Command-line front end; talks to the library only through the C API.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpsvuln/cpsvuln.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitRefused = 4;

int exit_code_for(cpsv_status s) {
  switch (s) {
    case CPSV_OK: return kExitOk;
    case CPSV_INVALID_INPUT:
    case CPSV_PARSE_ERROR:
    case CPSV_INVALID_MODEL:
    case CPSV_IO_ERROR:
    case CPSV_NULL_ARGUMENT: return kExitInvalid;
    case CPSV_PRECONDITION: return kExitRefused;
    default: return kExitNumerical;
  }
}

struct Failure {
  int code;
};

void check(cpsv_status s, const char* what) {
  if (s == CPSV_OK) return;
  std::cerr << "cpsvuln: " << what << ": " << cpsv_status_name(s) << ": " << cpsv_last_error()
            << "\n";
  throw Failure{exit_code_for(s)};
}

// Owning wrappers for the C handles.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Scenario = Handle<cpsv_scenario, cpsv_scenario_free>;
using Verdict = Handle<cpsv_verdict, cpsv_verdict_free>;
using Plan = Handle<cpsv_plan, cpsv_plan_free>;
using Traj = Handle<cpsv_trajectory, cpsv_trajectory_free>;
using Bound = Handle<cpsv_bound, cpsv_bound_free>;
using Reach = Handle<cpsv_reachset, cpsv_reachset_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  cpsv_string_free(s);
  return out;
}

struct Options {
  std::string scenario;
  std::string out_dir = ".";
  long steps = -1;
  double target = 1e3;
  double delta = -1.0;
  long T = 200;
  long dirs = 180;
  long samples = 400;
  long long seed = -1;
  std::string attack_file;
  std::vector<long> plane = {0, 1};
};

void write_file(const Options& o, const std::string& name, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  const std::filesystem::path path = std::filesystem::path(o.out_dir) / name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  if (!f) {
    std::cerr << "cpsvuln: cannot write " << path.string() << "\n";
    throw Failure{kExitInvalid};
  }
  std::cerr << "wrote " << path.string() << "\n";
}

cpsv_scenario_info load(const Options& o, Scenario& sc) {
  check(cpsv_scenario_load(o.scenario.c_str(), sc.out()), "loading scenario");
  cpsv_scenario_info info;
  check(cpsv_scenario_info_get(sc.get(), &info), "reading scenario");
  return info;
}

double delta_of(const Options& o, const cpsv_scenario_info& info) {
  return o.delta > 0.0 ? o.delta : info.delta;
}

int cmd_classify(const Options& o) {
  Scenario sc;
  load(o, sc);
  Verdict v;
  check(cpsv_classify(sc.get(), nullptr, v.out()), "classify");
  char* json = nullptr;
  check(cpsv_verdict_to_json(v.get(), &json), "serializing verdict");
  const std::string text = take(json);
  std::cout << text;
  if (o.out_dir != ".") write_file(o, "verdict.json", text);
  return kExitOk;
}

int cmd_attack(const Options& o) {
  Scenario sc;
  const cpsv_scenario_info info = load(o, sc);
  Verdict v;
  check(cpsv_classify(sc.get(), nullptr, v.out()), "classify");
  cpsv_class cls;
  check(cpsv_verdict_class(v.get(), &cls), "classify");
  if (cls == CPSV_INVULNERABLE) {
    std::cerr << "cpsvuln: refusing to synthesize: the loop is invulnerable, so every stealthy "
                 "attack keeps the estimation error bounded (see the 'bound' command)\n";
    return kExitRefused;
  }
  const long steps = o.steps > 0 ? o.steps : info.horizon;
  const double delta = delta_of(o, info);
  Plan plan;
  check(cpsv_synthesize_attack(sc.get(), v.get(), o.target, delta, steps, plan.out()),
        "synthesizing attack");
  Traj tr;
  check(cpsv_replay(sc.get(), plan.get(), steps, tr.out()), "replaying attack");
  cpsv_trajectory_summary sum;
  check(cpsv_trajectory_summary_get(tr.get(), &sum), "replay summary");

  char* s = nullptr;
  check(cpsv_plan_to_json(plan.get(), &s), "serializing plan");
  write_file(o, "attack.json", take(s));
  check(cpsv_trajectory_to_csv(tr.get(), &s), "serializing trajectory");
  write_file(o, "trajectory.csv", take(s));
  const std::string title = std::string(cpsv_class_name(cls)) + " attack replay";
  check(cpsv_trajectory_to_svg(tr.get(), title.c_str(), &s), "plotting trajectory");
  write_file(o, "trajectory.svg", take(s));

  std::vector<double> de(static_cast<size_t>(sum.horizon + 1));
  check(cpsv_trajectory_norms(tr.get(), de.data(), nullptr, de.size()), "replay norms");
  long crossing = -1;
  for (size_t t = 0; t < de.size(); ++t) {
    if (de[t] >= o.target) {
      crossing = static_cast<long>(t);
      break;
    }
  }
  std::printf("class: %s\n", cpsv_class_name(cls));
  std::printf("steps: %ld\nmax_dz: %.6e\nmax_de: %.6e\nfinal_de: %.6e\n", sum.horizon, sum.max_dz,
              sum.max_de, sum.final_de);
  if (crossing >= 0) {
    std::printf("target: %.6e (first reached at t=%ld)\n", o.target, crossing);
  } else {
    std::printf("target: %.6e (not reached within %ld steps)\n", o.target, sum.horizon);
  }
  if (sum.diverged) std::printf("diverged: clamp reached at t=%ld\n", sum.divergence_step);
  return kExitOk;
}

int cmd_bound(const Options& o) {
  Scenario sc;
  const cpsv_scenario_info info = load(o, sc);
  Bound b;
  check(cpsv_compute_bound(sc.get(), delta_of(o, info), nullptr, b.out()), "computing bound");
  char* s = nullptr;
  check(cpsv_bound_to_json(b.get(), &s), "serializing bound");
  const std::string text = take(s);
  std::cout << text;
  if (o.out_dir != ".") write_file(o, "bound.json", text);
  cpsv_bound_summary sum;
  check(cpsv_bound_summary_get(b.get(), &sum), "bound summary");
  if (!sum.converged) {
    std::cerr << "cpsvuln: impulse series did not converge up to N=" << sum.last_grid_size
              << "; the norm keeps growing, consistent with a vulnerable loop\n";
    return kExitNumerical;
  }
  if (!sum.kernel_condition_ok) {
    std::cerr << "cpsvuln: warning: ker S(z) is not contained in ker T(z) on the grid; the loop is "
                 "not invulnerable and the number above is not a bound\n";
  }
  return kExitOk;
}

int cmd_reachset(const Options& o) {
  Scenario sc;
  const cpsv_scenario_info info = load(o, sc);
  const double delta = delta_of(o, info);
  {
    Bound b;
    check(cpsv_compute_bound(sc.get(), delta, nullptr, b.out()), "computing bound");
    cpsv_bound_summary sum;
    check(cpsv_bound_summary_get(b.get(), &sum), "bound summary");
    if (!sum.converged) {
      char* s = nullptr;
      check(cpsv_bound_to_json(b.get(), &s), "serializing bound");
      std::cout << take(s);
      std::cerr << "cpsvuln: bound unconverged; no reachable-set estimate\n";
      return kExitNumerical;
    }
  }
  if (o.plane.size() != 2) {
    std::cerr << "cpsvuln: --plane takes two state indices\n";
    return kExitInvalid;
  }
  cpsv_reachset_options ro;
  cpsv_reachset_options_default(&ro);
  ro.delta = delta;
  ro.T = o.T;
  ro.n_dirs = o.dirs;
  ro.n_samples = o.samples;
  ro.seed = o.seed >= 0 ? static_cast<uint64_t>(o.seed) : info.seed;
  ro.plane_i = o.plane[0];
  ro.plane_j = o.plane[1];
  Reach r;
  check(cpsv_estimate_reachset(sc.get(), &ro, r.out()), "estimating reachable set");
  char* s = nullptr;
  check(cpsv_reachset_to_json(r.get(), &s), "serializing reachable set");
  const std::string text = take(s);
  std::cout << text;
  write_file(o, "reachset.json", text);
  check(cpsv_reachset_to_csv(r.get(), &s), "serializing reachable set");
  write_file(o, "reachset.csv", take(s));
  check(cpsv_reachset_to_svg(r.get(), "reachable set of Delta e", &s), "plotting reachable set");
  write_file(o, "reachset.svg", take(s));
  return kExitOk;
}

int cmd_simulate(const Options& o) {
  Scenario sc;
  const cpsv_scenario_info info = load(o, sc);
  Plan plan;
  if (!o.attack_file.empty()) check(cpsv_plan_load(o.attack_file.c_str(), plan.out()), "loading attack file");
  const long steps = o.steps > 0 ? o.steps : info.horizon;
  const uint64_t seed = o.seed >= 0 ? static_cast<uint64_t>(o.seed) : info.seed;
  Traj noisy, clean;
  check(cpsv_simulate(sc.get(), plan.get(), steps, seed, 1, noisy.out()), "simulating");
  check(cpsv_replay(sc.get(), plan.get(), steps, clean.out()), "replaying");
  double gap = 0.0;
  check(cpsv_trajectory_delta_gap(noisy.get(), clean.get(), &gap), "comparing runs");
  cpsv_trajectory_summary sum;
  check(cpsv_trajectory_summary_get(noisy.get(), &sum), "simulation summary");
  char* s = nullptr;
  check(cpsv_trajectory_to_csv(noisy.get(), &s), "serializing trajectory");
  write_file(o, "simulate.csv", take(s));
  check(cpsv_trajectory_to_svg(noisy.get(), "closed-loop run", &s), "plotting trajectory");
  write_file(o, "simulate.svg", take(s));
  std::printf("steps: %ld\nseed: %llu\nmax_dz: %.6e\nmax_de: %.6e\n", sum.horizon,
              static_cast<unsigned long long>(seed), sum.max_dz, sum.max_de);
  std::printf("noise-free replay gap: %.3e\n", gap);
  if (gap > 1e-10 * std::max(1.0, sum.max_de)) {
    std::cerr << "cpsvuln: noisy and noise-free difference trajectories disagree\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stealthy-attack vulnerability analysis for observer-based control loops"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", o.scenario, "Scenario JSON file")->required();
    sub->add_option("--out-dir", o.out_dir, "Directory for output files");
  };
  auto* classify = app.add_subcommand("classify", "Strictly vulnerable / vulnerable / invulnerable");
  add_common(classify);
  auto* attack = app.add_subcommand("attack", "Synthesize and replay a destabilizing stealthy attack");
  add_common(attack);
  attack->add_option("--steps", o.steps, "Replay horizon (default: scenario horizon)")->check(CLI::PositiveNumber);
  attack->add_option("--target", o.target, "Target ||Delta e|| for strict attacks")->check(CLI::NonNegativeNumber);
  attack->add_option("--delta", o.delta, "Stealth budget on ||Delta z||")->check(CLI::NonNegativeNumber);
  auto* bound = app.add_subcommand("bound", "Worst-case estimation-error bias bound");
  add_common(bound);
  bound->add_option("--delta", o.delta, "Stealth budget on ||Delta z||")->check(CLI::NonNegativeNumber);
  auto* reach = app.add_subcommand("reachset", "Reachable-set estimate of Delta e");
  add_common(reach);
  reach->add_option("--delta", o.delta, "Stealth budget on ||Delta z||")->check(CLI::NonNegativeNumber);
  reach->add_option("--T", o.T, "Endpoint time")->check(CLI::PositiveNumber);
  reach->add_option("--dirs", o.dirs, "Number of support directions")->check(CLI::PositiveNumber);
  reach->add_option("--samples", o.samples, "Number of random attacks")->check(CLI::PositiveNumber);
  reach->add_option("--seed", o.seed, "Random seed (default: scenario seed)");
  reach->add_option("--plane", o.plane, "Two state indices for the projection")->expected(2);
  auto* sim = app.add_subcommand("simulate", "Noisy closed-loop run with an optional attack file");
  add_common(sim);
  sim->add_option("--attack-file", o.attack_file, "Attack JSON written by 'attack'");
  sim->add_option("--seed", o.seed, "Noise seed (default: scenario seed)");
  sim->add_option("--steps", o.steps, "Horizon (default: scenario horizon)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*classify) return cmd_classify(o);
    if (*attack) return cmd_attack(o);
    if (*bound) return cmd_bound(o);
    if (*reach) return cmd_reachset(o);
    if (*sim) return cmd_simulate(o);
  } catch (const Failure& f) {
    return f.code;
  }
  return kExitInvalid;
}
