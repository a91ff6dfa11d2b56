#include "cpsvuln/cpsvuln.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "cpsvuln/attacksynth.hpp"
#include "cpsvuln/classifier.hpp"
#include "cpsvuln/error.hpp"
#include "cpsvuln/freqbound.hpp"
#include "cpsvuln/scenario.hpp"
#include "cpsvuln/serialize.hpp"
#include "cpsvuln/svg.hpp"

using namespace cpsvuln;

struct cpsv_scenario {
  Scenario sc;
};
struct cpsv_verdict {
  Scenario sc;
  VulnerabilityVerdict v;
  TolPolicy tol;
};
struct cpsv_plan {
  AttackPlan plan;
};
struct cpsv_trajectory {
  bool closed_loop = false;
  Trajectory tr;  // only `delta` is filled for replays
};
struct cpsv_bound {
  std::string name;
  BoundReport report;
};
struct cpsv_reachset {
  std::string name;
  ReachSetEstimate est;
};

namespace {

thread_local std::string g_last_error;

cpsv_status code_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidInput: return CPSV_INVALID_INPUT;
    case ErrorCode::kParseError: return CPSV_PARSE_ERROR;
    case ErrorCode::kInvalidModel: return CPSV_INVALID_MODEL;
    case ErrorCode::kNumericalFailure: return CPSV_NUMERICAL_FAILURE;
    case ErrorCode::kSearchExhausted: return CPSV_SEARCH_EXHAUSTED;
    case ErrorCode::kNotInvariant: return CPSV_NOT_INVARIANT;
    case ErrorCode::kWitnessInvalid: return CPSV_WITNESS_INVALID;
    case ErrorCode::kPreconditionViolation: return CPSV_PRECONDITION;
    case ErrorCode::kIoError: return CPSV_IO_ERROR;
  }
  return CPSV_NUMERICAL_FAILURE;
}

template <typename F>
cpsv_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return CPSV_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CPSV_NUMERICAL_FAILURE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CPSV_NUMERICAL_FAILURE;
  }
}

cpsv_status null_arg(const char* what) {
  g_last_error = std::string(what) + " is NULL";
  return CPSV_NULL_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

TolPolicy tol_from(const cpsv_tolerances* t) {
  TolPolicy tol;
  if (t) {
    if (t->rank_rel != 0.0) tol.rank_rel = t->rank_rel;
    if (t->eq_abs != 0.0) tol.eq_abs = t->eq_abs;
    if (t->unstable_margin != 0.0) tol.unstable_margin = t->unstable_margin;
  }
  tol.validate();
  return tol;
}

Index check_T(long T) {
  if (T < 0) fail(ErrorCode::kInvalidInput, "horizon must be non-negative");
  return static_cast<Index>(T);
}

}  // namespace

extern "C" {

const char* cpsv_version(void) { return "0.1.0"; }

const char* cpsv_status_name(cpsv_status status) {
  switch (status) {
    case CPSV_OK: return "ok";
    case CPSV_INVALID_INPUT: return "invalid-input";
    case CPSV_PARSE_ERROR: return "parse-error";
    case CPSV_INVALID_MODEL: return "invalid-model";
    case CPSV_NUMERICAL_FAILURE: return "numerical-failure";
    case CPSV_SEARCH_EXHAUSTED: return "search-exhausted";
    case CPSV_NOT_INVARIANT: return "not-invariant";
    case CPSV_WITNESS_INVALID: return "witness-invalid";
    case CPSV_PRECONDITION: return "precondition-violation";
    case CPSV_IO_ERROR: return "io-error";
    case CPSV_NULL_ARGUMENT: return "null-argument";
  }
  return "unknown";
}

const char* cpsv_last_error(void) { return g_last_error.c_str(); }

void cpsv_string_free(char* s) { std::free(s); }

// ------------------------------------------------------------------ scenario

cpsv_status cpsv_scenario_load(const char* path, cpsv_scenario** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new cpsv_scenario{load_scenario(path)}; });
}

cpsv_status cpsv_scenario_parse(const char* json_text, cpsv_scenario** out) {
  if (!json_text) return null_arg("json_text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new cpsv_scenario{parse_scenario(json_text)}; });
}

cpsv_status cpsv_scenario_info_get(const cpsv_scenario* s, cpsv_scenario_info* out) {
  if (!s) return null_arg("scenario");
  if (!out) return null_arg("out");
  return guarded([&] {
    const Scenario& sc = s->sc;
    out->n = static_cast<long>(sc.loop.n());
    out->p = static_cast<long>(sc.loop.p());
    out->m = static_cast<long>(sc.loop.m());
    out->p_a = static_cast<long>(sc.surface.p_a());
    out->m_a = static_cast<long>(sc.surface.m_a());
    out->delta = sc.delta;
    out->horizon = static_cast<long>(sc.horizon);
    out->seed = sc.seed;
  });
}

cpsv_status cpsv_scenario_name(const cpsv_scenario* s, char** out) {
  if (!s) return null_arg("scenario");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(s->sc.name); });
}

void cpsv_scenario_free(cpsv_scenario* s) { delete s; }

// ------------------------------------------------------------------- verdict

cpsv_status cpsv_classify(const cpsv_scenario* s, const cpsv_tolerances* tol,
                          cpsv_verdict** out) {
  if (!s) return null_arg("scenario");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const TolPolicy t = tol_from(tol);
    VulnerabilityVerdict v = classify(s->sc.loop, s->sc.surface, t);
    *out = new cpsv_verdict{s->sc, std::move(v), t};
  });
}

cpsv_status cpsv_verdict_class(const cpsv_verdict* v, cpsv_class* out) {
  if (!v) return null_arg("verdict");
  if (!out) return null_arg("out");
  switch (v->v.cls) {
    case VulnerabilityClass::kStrictlyVulnerable: *out = CPSV_STRICTLY_VULNERABLE; break;
    case VulnerabilityClass::kVulnerableNotStrictly: *out = CPSV_VULNERABLE; break;
    case VulnerabilityClass::kInvulnerable: *out = CPSV_INVULNERABLE; break;
  }
  return CPSV_OK;
}

const char* cpsv_class_name(cpsv_class c) {
  switch (c) {
    case CPSV_STRICTLY_VULNERABLE: return to_string(VulnerabilityClass::kStrictlyVulnerable);
    case CPSV_VULNERABLE: return to_string(VulnerabilityClass::kVulnerableNotStrictly);
    case CPSV_INVULNERABLE: return to_string(VulnerabilityClass::kInvulnerable);
  }
  return "unknown";
}

cpsv_status cpsv_verdict_to_json(const cpsv_verdict* v, char** out) {
  if (!v) return null_arg("verdict");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(verdict_to_json(v->sc.name, v->v)); });
}

cpsv_status cpsv_verdict_verify(const cpsv_verdict* v, double* max_residual) {
  if (!v) return null_arg("verdict");
  return guarded([&] {
    const WitnessReport rep = verify_witness(v->sc.loop, v->sc.surface, v->v, v->tol);
    if (max_residual) *max_residual = rep.max_residual;
  });
}

void cpsv_verdict_free(cpsv_verdict* v) { delete v; }

// ---------------------------------------------------------------------- plan

cpsv_status cpsv_synthesize_attack(const cpsv_scenario* s, const cpsv_verdict* v,
                                   double target, double delta, long horizon, cpsv_plan** out) {
  if (!s) return null_arg("scenario");
  if (!v) return null_arg("verdict");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const Scenario& sc = s->sc;
    switch (v->v.cls) {
      case VulnerabilityClass::kInvulnerable:
        fail(ErrorCode::kPreconditionViolation,
             "loop is invulnerable: no stealthy attack destabilizes the estimation error");
      case VulnerabilityClass::kStrictlyVulnerable:
        *out = new cpsv_plan{synth_strictly_stealthy(sc.loop, sc.surface, v->v, target)};
        return;
      case VulnerabilityClass::kVulnerableNotStrictly: {
        StealthBudget budget{delta, false};
        StealthySynthesis syn = synth_stealthy(sc.loop, sc.surface, *v->v.growth_witness, budget,
                                               check_T(horizon), v->tol);
        *out = new cpsv_plan{std::move(syn.plan)};
        return;
      }
    }
  });
}

cpsv_status cpsv_plan_kind_get(const cpsv_plan* p, cpsv_plan_kind* out) {
  if (!p) return null_arg("plan");
  if (!out) return null_arg("out");
  switch (p->plan.kind) {
    case PlanKind::kStrictGeometricLoop: *out = CPSV_PLAN_STRICT_LOOP; break;
    case PlanKind::kEigenGrowth: *out = CPSV_PLAN_EIGEN_GROWTH; break;
    case PlanKind::kMarginalGrowth: *out = CPSV_PLAN_MARGINAL_GROWTH; break;
  }
  return CPSV_OK;
}

cpsv_status cpsv_plan_horizon_hint(const cpsv_plan* p, long* out) {
  if (!p) return null_arg("plan");
  if (!out) return null_arg("out");
  *out = static_cast<long>(p->plan.horizon_hint);
  return CPSV_OK;
}

cpsv_status cpsv_plan_to_json(const cpsv_plan* p, char** out) {
  if (!p) return null_arg("plan");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(plan_to_json(p->plan)); });
}

cpsv_status cpsv_plan_from_json(const char* json_text, cpsv_plan** out) {
  if (!json_text) return null_arg("json_text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new cpsv_plan{plan_from_json(json_text)}; });
}

cpsv_status cpsv_plan_load(const char* path, cpsv_plan** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIoError, std::string("cannot open attack file ") + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    *out = new cpsv_plan{plan_from_json(buf.str())};
  });
}

cpsv_status cpsv_plan_inputs(const cpsv_plan* p, long T, double* buf, size_t len) {
  if (!p) return null_arg("plan");
  if (!buf && T > 0) return null_arg("buf");
  return guarded([&] {
    const Index steps = check_T(T);
    const Index q = p->plan.attack_dim;
    if (len < static_cast<size_t>(steps * q)) fail(ErrorCode::kInvalidInput, "buffer too small");
    const InputSequence seq = p->plan.evaluate(steps);
    for (Index t = 0; t < steps; ++t) {
      for (Index i = 0; i < q; ++i) buf[t * q + i] = seq[static_cast<size_t>(t)](i);
    }
  });
}

void cpsv_plan_free(cpsv_plan* p) { delete p; }

// ---------------------------------------------------------------- trajectory

namespace {

InputSequence attack_for(const Scenario& sc, const cpsv_plan* p, Index T) {
  const Index q = sc.surface.attack_dim();
  if (!p) return InputSequence(static_cast<size_t>(T), Vec::Zero(q));
  if (p->plan.attack_dim != q || p->plan.state_dim != sc.loop.n()) {
    fail(ErrorCode::kInvalidInput, "attack plan dimensions do not match the scenario");
  }
  return p->plan.evaluate(T);
}

}  // namespace

cpsv_status cpsv_replay(const cpsv_scenario* s, const cpsv_plan* p, long T,
                        cpsv_trajectory** out) {
  if (!s) return null_arg("scenario");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const Index steps = check_T(T);
    const DifferenceSystem ds = build_difference_system(s->sc.loop, s->sc.surface);
    auto tr = std::make_unique<cpsv_trajectory>();
    tr->tr.delta = simulate_difference(ds, attack_for(s->sc, p, steps), steps);
    *out = tr.release();
  });
}

cpsv_status cpsv_simulate(const cpsv_scenario* s, const cpsv_plan* p, long T, uint64_t seed,
                          int gaussian, cpsv_trajectory** out) {
  if (!s) return null_arg("scenario");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const Index steps = check_T(T);
    NoiseSpec noise{seed, gaussian != 0};
    auto tr = std::make_unique<cpsv_trajectory>();
    tr->closed_loop = true;
    tr->tr = simulate_closed_loop(s->sc.loop, s->sc.surface, attack_for(s->sc, p, steps), noise,
                                  steps);
    *out = tr.release();
  });
}

cpsv_status cpsv_trajectory_summary_get(const cpsv_trajectory* t, cpsv_trajectory_summary* out) {
  if (!t) return null_arg("trajectory");
  if (!out) return null_arg("out");
  const DeltaTrajectory& d = t->tr.delta;
  out->horizon = static_cast<long>(d.horizon());
  out->max_dz = d.max_dz;
  out->final_de = d.final_de;
  out->max_de = 0.0;
  for (const Vec& e : d.delta_e) out->max_de = std::max(out->max_de, e.norm());
  out->diverged = d.diverged ? 1 : 0;
  out->divergence_step = static_cast<long>(d.divergence_step);
  return CPSV_OK;
}

cpsv_status cpsv_trajectory_norms(const cpsv_trajectory* t, double* de, double* dz, size_t len) {
  if (!t) return null_arg("trajectory");
  const DeltaTrajectory& d = t->tr.delta;
  const size_t count = d.delta_e.size();
  if (len < count) {
    g_last_error = "buffer too small";
    return CPSV_INVALID_INPUT;
  }
  for (size_t i = 0; i < count; ++i) {
    if (de) de[i] = d.delta_e[i].norm();
    if (dz) dz[i] = d.delta_z[i].norm();
  }
  return CPSV_OK;
}

cpsv_status cpsv_trajectory_delta_gap(const cpsv_trajectory* a, const cpsv_trajectory* b,
                                      double* out) {
  if (!a || !b) return null_arg("trajectory");
  if (!out) return null_arg("out");
  const auto& ea = a->tr.delta.delta_e;
  const auto& eb = b->tr.delta.delta_e;
  if (ea.empty() || eb.empty() || ea[0].size() != eb[0].size()) {
    g_last_error = "trajectories have different state dimensions";
    return CPSV_INVALID_INPUT;
  }
  double gap = 0.0;
  for (size_t i = 0; i < std::min(ea.size(), eb.size()); ++i) {
    gap = std::max(gap, (ea[i] - eb[i]).norm());
  }
  *out = gap;
  return CPSV_OK;
}

cpsv_status cpsv_trajectory_to_csv(const cpsv_trajectory* t, char** out) {
  if (!t) return null_arg("trajectory");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = dup_string(t->closed_loop ? closed_loop_csv(t->tr) : delta_trajectory_csv(t->tr.delta));
  });
}

cpsv_status cpsv_trajectory_to_svg(const cpsv_trajectory* t, const char* title, char** out) {
  if (!t) return null_arg("trajectory");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = dup_string(svg_delta_plot(t->tr.delta, title ? title : "", t->tr.delta.diverged));
  });
}

void cpsv_trajectory_free(cpsv_trajectory* t) { delete t; }

// --------------------------------------------------------------------- bound

cpsv_status cpsv_compute_bound(const cpsv_scenario* s, double delta, const cpsv_tolerances* tol,
                               cpsv_bound** out) {
  if (!s) return null_arg("scenario");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    BoundReport rep = compute_bound(s->sc.loop, s->sc.surface, delta, tol_from(tol));
    *out = new cpsv_bound{s->sc.name, std::move(rep)};
  });
}

cpsv_status cpsv_bound_summary_get(const cpsv_bound* b, cpsv_bound_summary* out) {
  if (!b) return null_arg("bound");
  if (!out) return null_arg("out");
  const BoundReport& r = b->report;
  out->r_norm_1sp = r.r_norm_1sp;
  out->delta = r.delta;
  out->bound = r.bound;
  out->tail_mass = r.tail_mass;
  out->converged = r.converged ? 1 : 0;
  out->kernel_condition_ok = r.kernel_condition_ok ? 1 : 0;
  out->last_grid_size = r.grid_sizes.empty() ? 0 : static_cast<long>(r.grid_sizes.back());
  return CPSV_OK;
}

cpsv_status cpsv_bound_to_json(const cpsv_bound* b, char** out) {
  if (!b) return null_arg("bound");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(bound_to_json(b->name, b->report)); });
}

void cpsv_bound_free(cpsv_bound* b) { delete b; }

// ------------------------------------------------------------------ reachset

void cpsv_reachset_options_default(cpsv_reachset_options* opts) {
  if (!opts) return;
  const ReachSetOptions d;
  opts->delta = -1.0;
  opts->T = static_cast<long>(d.T);
  opts->n_dirs = static_cast<long>(d.n_dirs);
  opts->n_samples = static_cast<long>(d.n_samples);
  opts->seed = d.seed;
  opts->plane_i = static_cast<long>(d.plane_i);
  opts->plane_j = static_cast<long>(d.plane_j);
}

cpsv_status cpsv_estimate_reachset(const cpsv_scenario* s, const cpsv_reachset_options* opts,
                                   cpsv_reachset** out) {
  if (!s) return null_arg("scenario");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    cpsv_reachset_options o;
    cpsv_reachset_options_default(&o);
    if (opts) o = *opts;
    ReachSetOptions ro;
    ro.delta = o.delta < 0.0 ? s->sc.delta : o.delta;
    ro.T = static_cast<Index>(o.T);
    ro.n_dirs = static_cast<Index>(o.n_dirs);
    ro.n_samples = static_cast<Index>(o.n_samples);
    ro.seed = o.seed;
    ro.plane_i = static_cast<Index>(o.plane_i);
    ro.plane_j = static_cast<Index>(o.plane_j);
    ReachSetEstimate est = estimate_reachset(s->sc.loop, s->sc.surface, ro);
    *out = new cpsv_reachset{s->sc.name, std::move(est)};
  });
}

cpsv_status cpsv_reachset_summary_get(const cpsv_reachset* r, cpsv_reachset_summary* out) {
  if (!r) return null_arg("reachset");
  if (!out) return null_arg("out");
  const ReachSetEstimate& e = r->est;
  out->n_inner = static_cast<long>(e.inner.size());
  out->n_dirs = static_cast<long>(e.directions.size());
  out->bound = e.bound.bound;
  out->converged = e.bound.converged ? 1 : 0;
  out->max_de = 0.0;
  out->worst_support = 0.0;
  for (const InnerSample& s : e.inner) {
    out->max_de = std::max(out->max_de, s.max_de);
    for (size_t k = 0; k < e.directions.size(); ++k) {
      if (e.outer_support[k] > 0.0) {
        out->worst_support =
            std::max(out->worst_support, s.endpoint.dot(e.directions[k]) / e.outer_support[k]);
      }
    }
  }
  return CPSV_OK;
}

cpsv_status cpsv_reachset_to_csv(const cpsv_reachset* r, char** out) {
  if (!r) return null_arg("reachset");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(reachset_csv(r->est)); });
}

cpsv_status cpsv_reachset_to_json(const cpsv_reachset* r, char** out) {
  if (!r) return null_arg("reachset");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(reachset_to_json(r->name, r->est)); });
}

cpsv_status cpsv_reachset_to_svg(const cpsv_reachset* r, const char* title, char** out) {
  if (!r) return null_arg("reachset");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(svg_reachset_plot(r->est, title ? title : "")); });
}

void cpsv_reachset_free(cpsv_reachset* r) { delete r; }

}  // extern "C"
