#ifndef PNGNN_PNGNN_H
#define PNGNN_PNGNN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PNGNN_API __declspec(dllexport)
#else
#define PNGNN_API __attribute__((visibility("default")))
#endif

/* Status codes. Nonzero values match the C++ error categories. */
typedef enum pngnn_status {
    PNGNN_OK = 0,
    PNGNN_ERR_INVALID_ARGUMENT = 1,
    PNGNN_ERR_IO = 2,
    PNGNN_ERR_PARSE = 3,
    PNGNN_ERR_VALIDATION = 4,
    PNGNN_ERR_RANGE = 5,
    PNGNN_ERR_SHAPE = 6,
    PNGNN_ERR_STATE = 7,
    PNGNN_ERR_UNSUPPORTED = 8,
    PNGNN_ERR_COMPATIBILITY = 9,
    PNGNN_ERR_CONFIG = 10,
    PNGNN_ERR_SIGNATURE = 11,
    PNGNN_ERR_SAMPLING = 12,
    PNGNN_ERR_VERIFICATION = 13,
    PNGNN_ERR_NUMERIC = 14,
    PNGNN_ERR_INTERNAL = 99
} pngnn_status;

PNGNN_API const char* pngnn_version(void);
PNGNN_API const char* pngnn_status_name(pngnn_status status);
/* Message of the last failure on the calling thread; "" after success. */
PNGNN_API const char* pngnn_last_error(void);
/* Frees any char* returned through an out parameter. NULL is ignored. */
PNGNN_API void pngnn_string_free(char* s);

/* Datasets. layout is "transductive", "inductive" or "synthetic". */
typedef struct pngnn_dataset pngnn_dataset;
PNGNN_API pngnn_status pngnn_dataset_load(const char* dir, const char* layout, pngnn_dataset** out);
PNGNN_API pngnn_status pngnn_dataset_info(const pngnn_dataset* ds, char** json_out);
PNGNN_API void pngnn_dataset_free(pngnn_dataset* ds);

/* Writes a synthetic dataset plus meta.json to out_dir and audits it.
 * overrides_json may be NULL. *audit_ok is 1 when the audit is clean. */
PNGNN_API pngnn_status pngnn_synth_generate(const char* structure, uint64_t seed, const char* overrides_json,
                                            const char* out_dir, char** audit_json_out, int* audit_ok);

/* Model checking of a formula file against a graph (a triple file or a
 * dataset directory). The result lists the satisfying entities. */
PNGNN_API pngnn_status pngnn_check(const char* formula_path, const char* kg_path, char** json_out);

/* Compiles a formula file. weights_path (may be NULL) replays a weight
 * dump. The report holds the slot table and, with verify set, per-slot
 * agreement with the model checker and "passed". */
PNGNN_API pngnn_status pngnn_compile(const char* formula_path, const char* kg_path, const char* weights_path,
                                     int verify, char** json_out);
PNGNN_API pngnn_status pngnn_compile_weights(const char* formula_path, const char* kg_path, char** json_out);

/* Training. data_dir and seed may be NULL to keep the config's values.
 * The callback receives one JSON record per epoch. */
typedef void (*pngnn_epoch_callback)(const char* record_json, void* user);
PNGNN_API pngnn_status pngnn_train(const char* config_path, const char* data_dir, const char* out_dir,
                                   const uint64_t* seed, unsigned threads, pngnn_epoch_callback callback,
                                   void* user, char** result_json_out);

/* Checkpoints. */
typedef struct pngnn_model pngnn_model;
PNGNN_API pngnn_status pngnn_model_load(const char* checkpoint_path, pngnn_model** out);
/* Config and training metadata of the checkpoint. */
PNGNN_API pngnn_status pngnn_model_info(const pngnn_model* model, char** json_out);
/* Loads the dataset the checkpoint was trained on. */
PNGNN_API pngnn_status pngnn_model_dataset(const pngnn_model* model, pngnn_dataset** out);
/* Filtered ranking on split "train", "valid" or "test". ranks_path may be
 * NULL. */
PNGNN_API pngnn_status pngnn_model_evaluate(pngnn_model* model, const pngnn_dataset* ds, const char* split,
                                            unsigned threads, const char* ranks_path, char** metrics_json_out);
PNGNN_API void pngnn_model_free(pngnn_model* model);

/* Built-in expressivity checks. options_json may be NULL; keys: seed,
 * inverse, aggregator, draws, fuzz_trials. The report is a JSON object
 * with "checks" (array) and "summary". *all_passed is 1 when no check
 * failed. */
PNGNN_API pngnn_status pngnn_expressivity_suite(const char* options_json, char** json_out, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif
