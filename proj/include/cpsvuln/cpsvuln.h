/* C interface to the cpsvuln library.
 *
 * All objects are opaque handles released with their *_free function.
 * Functions return a cpsv_status; on failure the message for the calling
 * thread is available through cpsv_last_error(). Strings returned through
 * char** out-parameters are owned by the caller and released with
 * cpsv_string_free(). */
#ifndef CPSVULN_H_
#define CPSVULN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CPSV_BUILDING_LIBRARY)
#define CPSV_API __attribute__((visibility("default")))
#else
#define CPSV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cpsv_status {
  CPSV_OK = 0,
  CPSV_INVALID_INPUT = 1,
  CPSV_PARSE_ERROR = 2,
  CPSV_INVALID_MODEL = 3,
  CPSV_NUMERICAL_FAILURE = 4,
  CPSV_SEARCH_EXHAUSTED = 5,
  CPSV_NOT_INVARIANT = 6,
  CPSV_WITNESS_INVALID = 7,
  CPSV_PRECONDITION = 8,
  CPSV_IO_ERROR = 9,
  CPSV_NULL_ARGUMENT = 10
} cpsv_status;

typedef enum cpsv_class {
  CPSV_STRICTLY_VULNERABLE = 0,
  CPSV_VULNERABLE = 1,
  CPSV_INVULNERABLE = 2
} cpsv_class;

typedef enum cpsv_plan_kind {
  CPSV_PLAN_STRICT_LOOP = 0,
  CPSV_PLAN_EIGEN_GROWTH = 1,
  CPSV_PLAN_MARGINAL_GROWTH = 2
} cpsv_plan_kind;

typedef struct cpsv_scenario cpsv_scenario;
typedef struct cpsv_verdict cpsv_verdict;
typedef struct cpsv_plan cpsv_plan;
typedef struct cpsv_trajectory cpsv_trajectory;
typedef struct cpsv_bound cpsv_bound;
typedef struct cpsv_reachset cpsv_reachset;

/* Zero fields select the defaults (1e-9, 1e-8, 1e-9). */
typedef struct cpsv_tolerances {
  double rank_rel;
  double eq_abs;
  double unstable_margin;
} cpsv_tolerances;

typedef struct cpsv_scenario_info {
  long n, p, m;     /* plant state, input, output dimensions */
  long p_a, m_a;    /* attacked actuator directions, attacked sensors */
  double delta;
  long horizon;
  uint64_t seed;
} cpsv_scenario_info;

typedef struct cpsv_trajectory_summary {
  long horizon;
  double max_dz;
  double max_de;
  double final_de;
  int diverged;
  long divergence_step; /* -1 when not diverged */
} cpsv_trajectory_summary;

typedef struct cpsv_bound_summary {
  double r_norm_1sp;
  double delta;
  double bound;
  double tail_mass;
  int converged;
  int kernel_condition_ok;
  long last_grid_size;
} cpsv_bound_summary;

typedef struct cpsv_reachset_options {
  double delta;
  long T;
  long n_dirs;
  long n_samples;
  uint64_t seed;
  long plane_i, plane_j;
} cpsv_reachset_options;

typedef struct cpsv_reachset_summary {
  long n_inner;
  long n_dirs;
  double bound;
  double max_de;           /* over every sampled run */
  double worst_support;    /* max <p, d> / h(d) over points and directions */
  int converged;
} cpsv_reachset_summary;

CPSV_API const char* cpsv_version(void);
CPSV_API const char* cpsv_status_name(cpsv_status status);
/* Message of the last failed call on this thread ("" if none). */
CPSV_API const char* cpsv_last_error(void);
CPSV_API void cpsv_string_free(char* s);

CPSV_API cpsv_status cpsv_scenario_load(const char* path, cpsv_scenario** out);
CPSV_API cpsv_status cpsv_scenario_parse(const char* json_text, cpsv_scenario** out);
CPSV_API cpsv_status cpsv_scenario_info_get(const cpsv_scenario* s, cpsv_scenario_info* out);
CPSV_API cpsv_status cpsv_scenario_name(const cpsv_scenario* s, char** out);
CPSV_API void cpsv_scenario_free(cpsv_scenario* s);

/* tol may be NULL. */
CPSV_API cpsv_status cpsv_classify(const cpsv_scenario* s, const cpsv_tolerances* tol,
                                   cpsv_verdict** out);
CPSV_API cpsv_status cpsv_verdict_class(const cpsv_verdict* v, cpsv_class* out);
CPSV_API const char* cpsv_class_name(cpsv_class c);
CPSV_API cpsv_status cpsv_verdict_to_json(const cpsv_verdict* v, char** out);
/* Re-checks the witness identities; fails with CPSV_WITNESS_INVALID. */
CPSV_API cpsv_status cpsv_verdict_verify(const cpsv_verdict* v, double* max_residual);
CPSV_API void cpsv_verdict_free(cpsv_verdict* v);

/* Strict plan reaching ||Delta e|| >= target for strictly vulnerable loops,
 * delta-stealthy growth plan (scaled over `horizon` steps) for vulnerable
 * ones. Invulnerable verdicts give CPSV_PRECONDITION. */
CPSV_API cpsv_status cpsv_synthesize_attack(const cpsv_scenario* s, const cpsv_verdict* v,
                                            double target, double delta, long horizon,
                                            cpsv_plan** out);
CPSV_API cpsv_status cpsv_plan_kind_get(const cpsv_plan* p, cpsv_plan_kind* out);
CPSV_API cpsv_status cpsv_plan_horizon_hint(const cpsv_plan* p, long* out);
CPSV_API cpsv_status cpsv_plan_to_json(const cpsv_plan* p, char** out);
CPSV_API cpsv_status cpsv_plan_from_json(const char* json_text, cpsv_plan** out);
CPSV_API cpsv_status cpsv_plan_load(const char* path, cpsv_plan** out);
/* Writes T * attack_dim doubles (row t first) into buf of length len. */
CPSV_API cpsv_status cpsv_plan_inputs(const cpsv_plan* p, long T, double* buf, size_t len);
CPSV_API void cpsv_plan_free(cpsv_plan* p);

/* Deterministic replay of the difference dynamics; plan may be NULL (zero attack). */
CPSV_API cpsv_status cpsv_replay(const cpsv_scenario* s, const cpsv_plan* p, long T,
                                 cpsv_trajectory** out);
/* Healthy and attacked closed-loop runs with shared noise (gaussian != 0). */
CPSV_API cpsv_status cpsv_simulate(const cpsv_scenario* s, const cpsv_plan* p, long T,
                                   uint64_t seed, int gaussian, cpsv_trajectory** out);
CPSV_API cpsv_status cpsv_trajectory_summary_get(const cpsv_trajectory* t,
                                                 cpsv_trajectory_summary* out);
/* Writes horizon+1 norms into each non-NULL buffer of length len. */
CPSV_API cpsv_status cpsv_trajectory_norms(const cpsv_trajectory* t, double* de, double* dz,
                                           size_t len);
/* max_t ||Delta e_t(a) - Delta e_t(b)|| over the common horizon. */
CPSV_API cpsv_status cpsv_trajectory_delta_gap(const cpsv_trajectory* a, const cpsv_trajectory* b,
                                               double* out);
CPSV_API cpsv_status cpsv_trajectory_to_csv(const cpsv_trajectory* t, char** out);
CPSV_API cpsv_status cpsv_trajectory_to_svg(const cpsv_trajectory* t, const char* title,
                                            char** out);
CPSV_API void cpsv_trajectory_free(cpsv_trajectory* t);

CPSV_API cpsv_status cpsv_compute_bound(const cpsv_scenario* s, double delta,
                                        const cpsv_tolerances* tol, cpsv_bound** out);
CPSV_API cpsv_status cpsv_bound_summary_get(const cpsv_bound* b, cpsv_bound_summary* out);
CPSV_API cpsv_status cpsv_bound_to_json(const cpsv_bound* b, char** out);
CPSV_API void cpsv_bound_free(cpsv_bound* b);

/* opts may be NULL (T 200, 180 directions, 400 samples). A negative delta
 * takes the scenario's delta. */
CPSV_API void cpsv_reachset_options_default(cpsv_reachset_options* opts);
CPSV_API cpsv_status cpsv_estimate_reachset(const cpsv_scenario* s,
                                            const cpsv_reachset_options* opts,
                                            cpsv_reachset** out);
CPSV_API cpsv_status cpsv_reachset_summary_get(const cpsv_reachset* r,
                                               cpsv_reachset_summary* out);
CPSV_API cpsv_status cpsv_reachset_to_csv(const cpsv_reachset* r, char** out);
CPSV_API cpsv_status cpsv_reachset_to_json(const cpsv_reachset* r, char** out);
CPSV_API cpsv_status cpsv_reachset_to_svg(const cpsv_reachset* r, const char* title, char** out);
CPSV_API void cpsv_reachset_free(cpsv_reachset* r);

#ifdef __cplusplus
}
#endif

#endif /* CPSVULN_H_ */
