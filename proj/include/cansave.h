/*
 * cansave — cancer-risk ranking pipeline over event-stream EHR data.
 *
 * C interface of the shared library. All functions return 0 on success,
 * 1 on runtime failure, 2 on configuration/usage errors; the message for the
 * last failing call on the current thread is available via
 * cansave_last_error(). Handles are opaque and freed with their *_free
 * function.
 */
#ifndef CANSAVE_H
#define CANSAVE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define CANSAVE_OK 0
#define CANSAVE_ERR_RUNTIME 1
#define CANSAVE_ERR_CONFIG 2

const char* cansave_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* cansave_last_error(void);

/* Generate a synthetic corpus (ehr.csv, truth.csv, manifest.json) from a
 * population-spec JSON file. */
int cansave_generate(const char* spec_json_path, const char* out_dir);

/* Run one pipeline stage: "split", "fit-survival", "featurize", "train",
 * "evaluate", "retro", or "report". `overrides_json` is an optional JSON
 * object merged over the config file (NULL for none); `threads` <= 0 keeps
 * the config value. */
int cansave_run_stage(const char* stage, const char* config_json_path,
                      const char* overrides_json, int force, int threads);

/* Full chain: split, fit-survival, featurize, train, evaluate. */
int cansave_pipeline(const char* config_json_path, const char* overrides_json,
                     int force, int threads);

/* ---- fitted-model handles ---------------------------------------------- */

typedef struct cansave_aft cansave_aft;

int cansave_aft_load(const char* model_json_path, cansave_aft** out_model);
int cansave_aft_n_covariates(const cansave_aft* model, size_t* out_n);
/* Survival probability S(age | x). `covariates` has length n_covariates. */
int cansave_aft_survival(const cansave_aft* model, double age_years,
                         const double* covariates, size_t n_covariates,
                         double* out_probability);
void cansave_aft_free(cansave_aft* model);

typedef struct cansave_gbdt cansave_gbdt;

int cansave_gbdt_load(const char* model_json_path, cansave_gbdt** out_model);
int cansave_gbdt_n_features(const cansave_gbdt* model, size_t* out_n);
/* Risk probability for one feature row (NaN = missing). */
int cansave_gbdt_predict(const cansave_gbdt* model, const double* features,
                         size_t n_features, double* out_probability);
void cansave_gbdt_free(cansave_gbdt* model);

#ifdef __cplusplus
}
#endif

#endif /* CANSAVE_H */
