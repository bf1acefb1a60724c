/*
 * protocalib C API.
 *
 * Every function that can fail returns a pcal_status; on failure the message
 * is available from pcal_last_error() on the calling thread until the next
 * failing call. Handles are opaque and owned by the caller, who releases them
 * with the matching *_free function (NULL is accepted).
 *
 * Optional metrics (rates with an empty denominator, new-class accuracy in
 * session 0, ...) are reported as NaN.
 */
#ifndef PROTOCALIB_H
#define PROTOCALIB_H

#include <stddef.h>
#include <stdint.h>

#if defined(PCAL_BUILDING_LIBRARY)
#define PCAL_API __attribute__((visibility("default")))
#else
#define PCAL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pcal_status {
    PCAL_OK = 0,
    PCAL_ERR_INVALID_ARGUMENT = 1,
    PCAL_ERR_PARSE = 2,
    PCAL_ERR_VALIDATION = 3,
    PCAL_ERR_NUMERIC = 4,
    PCAL_ERR_IO = 5,
    PCAL_ERR_INTERNAL = 6
} pcal_status;

typedef enum pcal_strategy {
    PCAL_STRATEGY_PROTONET = 0,
    PCAL_STRATEGY_TEEN = 1,
    PCAL_STRATEGY_SIMTEEN = 2
} pcal_strategy;

typedef enum pcal_report_format { PCAL_FORMAT_CSV = 0, PCAL_FORMAT_JSON = 1 } pcal_report_format;

typedef enum pcal_change_category {
    PCAL_CHANGE_UC = 0, /* prediction unchanged */
    PCAL_CHANGE_WR = 1, /* wrong -> right */
    PCAL_CHANGE_RW = 2, /* right -> wrong */
    PCAL_CHANGE_WW = 3  /* wrong -> a different wrong */
} pcal_change_category;

typedef struct pcal_dataset pcal_dataset;
typedef struct pcal_fscil_result pcal_fscil_result;
typedef struct pcal_fsl_result pcal_fsl_result;
typedef struct pcal_synthetic pcal_synthetic;
typedef struct pcal_analysis pcal_analysis;

typedef struct pcal_calib_params {
    pcal_strategy strategy;
    double alpha;
    double tau;
    uint32_t simteen_k;
    int simteen_mean; /* nonzero: SimTEEN averages its K neighbours instead of summing */
} pcal_calib_params;

typedef struct pcal_run_options {
    uint32_t threads; /* 0 = one per hardware thread */
    uint32_t m_new_similar;
    double base_fraction;
} pcal_run_options;

typedef struct pcal_episode_spec {
    uint32_t ways;
    uint32_t shots;
    uint32_t queries;
    uint32_t episodes;
    uint64_t seed;
} pcal_episode_spec;

typedef struct pcal_synth_spec {
    uint32_t base_classes;
    uint32_t new_classes;
    uint32_t sessions_after_base;
    uint32_t dim;
    uint32_t base_train_per_class;
    uint32_t shots;
    uint32_t test_per_class;
    uint32_t mixture_support;
    double mixture_noise;
    double within_class_sigma;
    double base_spread;
    uint64_t seed;
} pcal_synth_spec;

typedef struct pcal_dataset_info {
    uint32_t sessions;
    uint32_t dim;
    uint64_t records;
    uint32_t classes;
} pcal_dataset_info;

typedef struct pcal_metric_bundle {
    double avg_acc;
    double base_acc;
    double new_acc;
    double hmean;
    double fnr;
    double fpr;
    double tbr;
    double tnr;
} pcal_metric_bundle;

typedef struct pcal_category_stats {
    uint64_t count;
    uint64_t base_count;
    uint64_t new_count;
    double base_pct;
    double new_pct;
} pcal_category_stats;

/* Errors ------------------------------------------------------------------ */

PCAL_API const char* pcal_last_error(void);
PCAL_API const char* pcal_status_name(pcal_status status);

/* Defaults: teen, alpha 0.5, tau 16, k 1 | auto threads, 10 similar bases,
 * 20% similar news | 5-way 5-shot 15 queries 600 episodes seed 0 |
 * synthetic: 10 base, 5 new in one session, dim 16, 200 base train, 5 shots,
 * 50 test, support 2, noise 0.5, sigma 1, spread 2, seed 0 */
PCAL_API void pcal_calib_params_default(pcal_calib_params* params);
PCAL_API void pcal_run_options_default(pcal_run_options* options);
PCAL_API void pcal_episode_spec_default(pcal_episode_spec* spec);
PCAL_API void pcal_synth_spec_default(pcal_synth_spec* spec);

/* Datasets ---------------------------------------------------------------- */

PCAL_API pcal_status pcal_dataset_load(const char* path, pcal_dataset** out);
PCAL_API pcal_status pcal_dataset_save(const pcal_dataset* dataset, const char* path);
PCAL_API pcal_status pcal_dataset_get_info(const pcal_dataset* dataset, pcal_dataset_info* info);
/* Copies up to `capacity` ids of C_session; *count receives the full size. */
PCAL_API pcal_status pcal_dataset_session_classes(const pcal_dataset* dataset, uint32_t session, uint32_t* ids,
                                                  size_t capacity, size_t* count);
PCAL_API void pcal_dataset_free(pcal_dataset* dataset);

/* FSCIL ------------------------------------------------------------------- */

PCAL_API pcal_status pcal_run_fscil(const pcal_dataset* dataset, const pcal_calib_params* params,
                                    const pcal_run_options* options, pcal_fscil_result** out);
PCAL_API size_t pcal_fscil_session_count(const pcal_fscil_result* result);
PCAL_API pcal_status pcal_fscil_session_metrics(const pcal_fscil_result* result, size_t session,
                                                pcal_metric_bundle* metrics);
PCAL_API pcal_status pcal_fscil_performance_drop(const pcal_fscil_result* result, double* pd);
/* Copies up to `capacity` predictions and true labels (either may be NULL). */
PCAL_API pcal_status pcal_fscil_predictions(const pcal_fscil_result* result, size_t session, uint32_t* predictions,
                                            uint32_t* true_labels, size_t capacity, size_t* count);
PCAL_API pcal_status pcal_fscil_write_report(const pcal_fscil_result* result, pcal_report_format format,
                                             const char* path);
/* Writes `index,true_label,pred_label` rows for one session. */
PCAL_API pcal_status pcal_fscil_write_predictions(const pcal_fscil_result* result, size_t session, const char* path);
PCAL_API void pcal_fscil_free(pcal_fscil_result* result);

/* FSL --------------------------------------------------------------------- */

PCAL_API pcal_status pcal_run_fsl(const pcal_dataset* dataset, const pcal_episode_spec* spec,
                                  const pcal_calib_params* params, const pcal_run_options* options,
                                  pcal_fsl_result** out);
/* half_width is NaN for a single episode. */
PCAL_API pcal_status pcal_fsl_summary(const pcal_fsl_result* result, double* mean, double* half_width,
                                      size_t* episodes);
PCAL_API pcal_status pcal_fsl_accuracies(const pcal_fsl_result* result, double* out, size_t capacity, size_t* count);
PCAL_API pcal_status pcal_fsl_write_report(const pcal_fsl_result* result, pcal_report_format format,
                                           const char* path);
PCAL_API void pcal_fsl_free(pcal_fsl_result* result);

/* Synthetic benchmark ----------------------------------------------------- */

PCAL_API pcal_status pcal_generate_synthetic(const pcal_synth_spec* spec, pcal_synthetic** out);
/* Returns a new dataset handle holding a copy of the generated records. */
PCAL_API pcal_status pcal_synthetic_dataset(const pcal_synthetic* synthetic, pcal_dataset** out);
/* truth_path may be NULL. */
PCAL_API pcal_status pcal_synthetic_write(const pcal_synthetic* synthetic, const char* embeddings_path,
                                          const char* truth_path);
PCAL_API pcal_status pcal_synthetic_min_base_separation(const pcal_synthetic* synthetic, double* separation);
/* Mean distance between each new class's prototype in `session` of the run and its true mean. */
PCAL_API pcal_status pcal_synthetic_new_prototype_error(const pcal_synthetic* synthetic,
                                                        const pcal_fscil_result* result, size_t session,
                                                        double* mean_error);
PCAL_API void pcal_synthetic_free(pcal_synthetic* synthetic);

/* Diagnostics over two prediction files ------------------------------------ */

PCAL_API pcal_status pcal_analyze_files(const pcal_dataset* dataset, const char* before_path, const char* after_path,
                                        const pcal_run_options* options, pcal_analysis** out);
PCAL_API pcal_status pcal_analysis_change(const pcal_analysis* analysis, pcal_change_category category,
                                          pcal_category_stats* stats);
/* before_or_after: 0 = before run, 1 = after run. Fields without meaning here are NaN. */
PCAL_API pcal_status pcal_analysis_run_metrics(const pcal_analysis* analysis, int before_or_after,
                                               pcal_metric_bundle* metrics);
PCAL_API pcal_status pcal_analysis_write_report(const pcal_analysis* analysis, pcal_report_format format,
                                                int collapse_ww, const char* path);
PCAL_API void pcal_analysis_free(pcal_analysis* analysis);

/* Primitives over row-major buffers --------------------------------------- */

PCAL_API pcal_status pcal_compute_prototype(const double* features, size_t count, size_t dim, double* out);
PCAL_API pcal_status pcal_softmax_weights(const double* new_proto, const double* base_protos, size_t base_count,
                                          size_t dim, double tau, double* weights);
PCAL_API pcal_status pcal_calibrate_teen(const double* new_proto, const double* base_protos, size_t base_count,
                                         size_t dim, double alpha, double tau, double* out);
PCAL_API pcal_status pcal_predict_batch(const double* features, size_t count, const double* prototypes,
                                        const uint32_t* class_ids, size_t class_count, size_t dim, uint32_t threads,
                                        uint32_t* out);
PCAL_API pcal_status pcal_harmonic_mean(double base_acc, double new_acc, double* out);
PCAL_API pcal_status pcal_performance_drop(const double* accs, size_t count, double* out);

#ifdef __cplusplus
}
#endif

#endif /* PROTOCALIB_H */
