/*
 * keps.h - C API for the pseudospectral k-epsilon perturbation solver.
 *
 * Opaque handles + integer status codes. Every entry point returns KEPS_OK
 * or an error code; keps_last_error() carries the message for the last
 * failing call on the current thread. Status codes double as the CLI exit
 * codes: 0 clean, 1 usage/config error, 2 admissibility-guard violation,
 * 3 step failure.
 */

#ifndef KEPS_H
#define KEPS_H

#ifdef __cplusplus
extern "C" {
#endif

#define KEPS_OK 0
#define KEPS_ERR_CONFIG 1
#define KEPS_ERR_GUARD 2
#define KEPS_ERR_STEP 3

typedef struct keps_config keps_config;
typedef struct keps_result keps_result;
typedef struct keps_state keps_state;

const char* keps_version(void);

/* Message for the last failing call on this thread; "" when none. */
const char* keps_last_error(void);

/* --- configuration ------------------------------------------------------ */

int keps_config_load(const char* path, keps_config** out);
int keps_config_parse(const char* json_text, keps_config** out);
int keps_config_set_seed(keps_config* cfg, unsigned long long seed);
int keps_config_set_output_dir(keps_config* cfg, const char* dir);

/* Config echo with defaults applied; owned by cfg, valid until freed. */
const char* keps_config_json(const keps_config* cfg);
void keps_config_free(keps_config* cfg);

/* --- experiment drivers -------------------------------------------------- */
/* Each driver writes its files under the config output directory and fills
 * a result handle. The returned status mirrors keps_result_status(). */

int keps_run(const keps_config* cfg, keps_result** out);
int keps_sweep(const keps_config* cfg, const double* amplitudes, int count,
               keps_result** out);
int keps_refine(const keps_config* cfg, const double* dts, int dt_count,
                const int* resolutions, int res_count, keps_result** out);
int keps_audit(const keps_config* cfg, keps_result** out);

int keps_result_status(const keps_result* res);
const char* keps_result_summary_json(const keps_result* res);
void keps_result_free(keps_result* res);

/* --- checkpoints ---------------------------------------------------------- */

int keps_checkpoint_read(const char* path, keps_state** out);
int keps_checkpoint_write(const keps_state* state, const char* path);
int keps_state_time(const keps_state* state, double* t_out);

/* Energy/diagnostic report of the state under its checkpointed parameters
 * (Lyapunov weight alpha = 0.01); owned by the state handle. */
const char* keps_state_report_json(const keps_state* state);
void keps_state_free(keps_state* state);

#ifdef __cplusplus
}
#endif

#endif /* KEPS_H */
