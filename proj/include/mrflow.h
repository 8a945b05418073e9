#ifndef MRFLOW_H
#define MRFLOW_H

/* C API for the regular-flow laboratory: particle trajectories of rough
 * vector fields on exhausted domains, blow-up classification, and the
 * experiment runner. All functions return MRF_OK (0) on success; on failure
 * they return a negative code and mrf_last_error() describes the problem
 * (thread-local). Handles are opaque and must be released with the matching
 * _destroy call. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MRF_OK 0
#define MRF_ERR_INVALID_ARG (-1)  /* null handle, bad dimension, bad JSON */
#define MRF_ERR_NUMERIC (-2)      /* integration or evaluation failure */
#define MRF_ERR_IO (-3)           /* config or output file problem */
#define MRF_ERR_BUFFER (-4)       /* output buffer too small */

typedef struct mrf_field mrf_field;
typedef struct mrf_domain mrf_domain;
typedef struct mrf_trajectory mrf_trajectory;

/* Termination status of a trajectory. */
#define MRF_TERM_HORIZON 0
#define MRF_TERM_BLOWUP 1
#define MRF_TERM_UNDERFLOW 2

/* Blow-up classification. */
#define MRF_BLOWUP_NONE 0
#define MRF_BLOWUP_PROPER 1
#define MRF_BLOWUP_OSCILLATING 2

const char* mrf_version(void);

/* Last error message for the calling thread; empty string if none. */
const char* mrf_last_error(void);

/* Field from a JSON spec: {"name": "...", ...parameters...}, same schema as
 * the "field" section of an experiment config. */
int mrf_field_create(const char* spec_json, mrf_field** out);
void mrf_field_destroy(mrf_field* f);
int mrf_field_dim(const mrf_field* f, int* out_dim);
/* Evaluate b(t, x); x and out_v hold dim doubles. */
int mrf_field_eval(const mrf_field* f, double t, const double* x, double* out_v);

/* Exhausted domain from a region string ("rspace(d)", "ball([..],r)",
 * "box([..],[..])", "union[..;..]") with nlevels exhaustion levels. */
int mrf_domain_create(const char* omega_region, int nlevels, mrf_domain** out);
void mrf_domain_destroy(mrf_domain* d);

/* Integrate one trajectory from x0 (dim doubles) with parameters from JSON
 * (same schema as the "integrator" config section; pass "{}" for defaults). */
int mrf_integrate(const mrf_field* f, const mrf_domain* d, const double* x0,
                  const char* params_json, mrf_trajectory** out);
void mrf_trajectory_destroy(mrf_trajectory* t);

int mrf_trajectory_size(const mrf_trajectory* t, size_t* out_n);
/* Sample i: time into *out_t, position into out_x (dim doubles). */
int mrf_trajectory_sample(const mrf_trajectory* t, size_t i, double* out_t, double* out_x);
/* Maximal-time estimate and termination status (MRF_TERM_*). */
int mrf_trajectory_info(const mrf_trajectory* t, double* out_t_max, int* out_termination);

/* Classify the trajectory's blow-up behaviour (MRF_BLOWUP_*). */
int mrf_classify_blowup(const mrf_trajectory* t, const mrf_domain* d, int window,
                        double high_threshold, double low_threshold, int* out_class);

/* Run an experiment given a config path or a built-in preset name. Writes
 * report.json and CSV artifacts under out_dir (NULL: "out-<name>" in the
 * cwd). seed >= 0 overrides the ensemble seed. *out_all_pass is 1 iff every
 * check in the report passed. Returns MRF_OK even when checks fail; a
 * nonzero return means the experiment could not run. */
int mrf_run_experiment(const char* path_or_preset, const char* out_dir, int threads,
                       long long seed, int* out_all_pass);

/* Newline-separated "name\tanchor\truntime" lines for the built-in presets.
 * Returns MRF_ERR_BUFFER (with required size in *inout_size) if cap is too
 * small. */
int mrf_list_experiments(char* buf, size_t cap, size_t* inout_size);

#ifdef __cplusplus
}
#endif

#endif /* MRFLOW_H */
