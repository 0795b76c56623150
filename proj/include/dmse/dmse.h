/* Copyright 2026 The dmse Authors
 * License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * C interface to the dual-microphone speech enhancement toolkit. Functions
 * return a status code; on failure dmse_last_error() describes the cause
 * for the calling thread until its next call into the library.
 */
#ifndef DMSE_DMSE_H_
#define DMSE_DMSE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(DMSE_BUILDING_LIBRARY)
#define DMSE_API __attribute__((visibility("default")))
#else
#define DMSE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dmse_status {
  DMSE_OK = 0,
  DMSE_ERR_INVALID_ARGUMENT = 1,
  DMSE_ERR_IO = 2,
  DMSE_ERR_FORMAT = 3,
  DMSE_ERR_NUMERIC = 4,
  DMSE_ERR_INTERNAL = 5
} dmse_status;

typedef struct dmse_config dmse_config;
typedef struct dmse_model dmse_model;

DMSE_API const char* dmse_version(void);
DMSE_API const char* dmse_last_error(void);
DMSE_API const char* dmse_status_name(dmse_status status);
/* Releases strings returned through char** out-parameters. */
DMSE_API void dmse_string_free(char* s);

/* ---- configuration ---- */
DMSE_API dmse_status dmse_config_create(dmse_config** out);
DMSE_API dmse_status dmse_config_load(const char* path, dmse_config** out);
DMSE_API dmse_status dmse_config_parse(const char* json, dmse_config** out);
DMSE_API void dmse_config_destroy(dmse_config* config);
/* key is dotted ("model.heads", "seed"); value is a JSON literal or a bare string. */
DMSE_API dmse_status dmse_config_set(dmse_config* config, const char* key, const char* value);
DMSE_API dmse_status dmse_config_dump(const dmse_config* config, char** out_json);
/* Reads one entry of `paths` ("dataset", "stats", ...). */
DMSE_API dmse_status dmse_config_path(const dmse_config* config, const char* name, char** out_path);

/* ---- data ---- */
DMSE_API dmse_status dmse_make_dataset(const dmse_config* config, const char* out_dir, size_t* out_scenes,
                                       size_t* out_errors);
DMSE_API dmse_status dmse_compute_stats(const dmse_config* config, const char* manifest_path,
                                        const char* stats_path);

/* ---- training ---- */
typedef void (*dmse_epoch_callback)(size_t epoch, double l_f, double l_snr, double total, void* user);

DMSE_API dmse_status dmse_train(const dmse_config* config, const char* manifest_path, const char* stats_path,
                                const char* checkpoint_path, const char* loss_log_path, dmse_epoch_callback callback,
                                void* user);

/* ---- inference ---- */
DMSE_API dmse_status dmse_model_load(const char* checkpoint_path, dmse_model** out);
DMSE_API void dmse_model_destroy(dmse_model* model);
DMSE_API dmse_status dmse_model_parameter_count(const dmse_model* model, size_t* out);
DMSE_API dmse_status dmse_model_epoch(const dmse_model* model, uint32_t* out);

/* stats_path may be NULL for models without an SNR head; mask_dir may be
 * NULL to skip the per-block gate dump. */
DMSE_API dmse_status dmse_enhance_file(const dmse_model* model, const dmse_config* config, const char* stats_path,
                                       const char* input_wav, const char* output_wav, const char* mask_dir,
                                       size_t* out_mask_files);
/* Writes <id>_enhanced.wav for every scene of the manifest into out_dir. */
DMSE_API dmse_status dmse_enhance_manifest(const dmse_model* model, const dmse_config* config,
                                           const char* stats_path, const char* manifest_path, const char* out_dir,
                                           size_t* out_count);

/* ---- evaluation ---- */
typedef enum dmse_estimate_source {
  DMSE_ESTIMATE_NOISY = 0,
  DMSE_ESTIMATE_CLEAN = 1,
  DMSE_ESTIMATE_DIRECTORY = 2
} dmse_estimate_source;

typedef struct dmse_metric_summary {
  size_t count;
  size_t errors;
  double mean_si_sdr;
  double mean_seg_snr;
  double mean_stoi;
} dmse_metric_summary;

DMSE_API dmse_status dmse_evaluate(const char* manifest_path, dmse_estimate_source source,
                                   const char* estimates_dir, const char* report_path, dmse_metric_summary* out);

/* ---- self checks ---- */
typedef void (*dmse_gradcheck_callback)(const char* name, double max_rel_error, size_t checked, int passed,
                                        void* user);

DMSE_API dmse_status dmse_gradcheck(uint64_t seed, double tolerance, dmse_gradcheck_callback callback, void* user,
                                    int* out_all_passed);
DMSE_API dmse_status dmse_oracle_gain(size_t mixtures, double snr_db, uint64_t seed, double* out_mean_improvement_db);

#ifdef __cplusplus
}
#endif

#endif /* DMSE_DMSE_H_ */
