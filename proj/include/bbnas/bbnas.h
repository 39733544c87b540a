/* bbnas: differentiable architecture search on a bilateral-branch network.
 *
 * C interface. Every function returns a bbnas_status; on failure a message
 * for the calling thread is available from bbnas_last_error() until the next
 * call on that thread.
 *
 * Text results use caller-provided buffers: pass buf/cap, receive the full
 * length (excluding the terminating NUL) in *len. When cap is too small the
 * call returns BBNAS_ERR_BUFFER_TOO_SMALL, writes nothing, and *len tells
 * how much to allocate. buf may be NULL when cap is 0.
 */
#ifndef BBNAS_BBNAS_H
#define BBNAS_BBNAS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BBNAS_BUILDING)
#    define BBNAS_API __declspec(dllexport)
#  else
#    define BBNAS_API __declspec(dllimport)
#  endif
#else
#  define BBNAS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bbnas_status {
    BBNAS_OK = 0,
    BBNAS_ERR_INVALID_ARGUMENT = 1,
    BBNAS_ERR_SHAPE = 2,
    BBNAS_ERR_IO = 3,
    BBNAS_ERR_FORMAT = 4,
    BBNAS_ERR_NUMERIC = 5,
    BBNAS_ERR_STATE = 6,
    BBNAS_ERR_BUFFER_TOO_SMALL = 7,
    BBNAS_ERR_INTERNAL = 8
} bbnas_status;

BBNAS_API const char* bbnas_version(void);
BBNAS_API const char* bbnas_status_name(bbnas_status status);
BBNAS_API const char* bbnas_last_error(void);

/* ---- configuration ---------------------------------------------------- */

typedef struct bbnas_config bbnas_config;

/* Defaults for every key. */
BBNAS_API bbnas_status bbnas_config_new(bbnas_config** out);
BBNAS_API bbnas_status bbnas_config_parse(const char* text, bbnas_config** out);
BBNAS_API bbnas_status bbnas_config_load(const char* path, bbnas_config** out);
BBNAS_API void bbnas_config_free(bbnas_config* cfg);

BBNAS_API bbnas_status bbnas_config_set(bbnas_config* cfg, const char* key, const char* value);
BBNAS_API bbnas_status bbnas_config_get(const bbnas_config* cfg, const char* key, char* buf,
                                        size_t cap, size_t* len);
/* Canonical "key = value" text. */
BBNAS_API bbnas_status bbnas_config_dump(const bbnas_config* cfg, char* buf, size_t cap,
                                         size_t* len);
/* Dump plus the "plan.*" lines the mode derives. */
BBNAS_API bbnas_status bbnas_config_plan(const bbnas_config* cfg, char* buf, size_t cap,
                                         size_t* len);
/* BBNAS_OK when valid; otherwise BBNAS_ERR_INVALID_ARGUMENT with every
 * problem listed in bbnas_last_error(). */
BBNAS_API bbnas_status bbnas_config_validate(const bbnas_config* cfg);
BBNAS_API bbnas_status bbnas_config_hash(const bbnas_config* cfg, uint64_t* out);

/* ---- runs --------------------------------------------------------------- */

typedef struct bbnas_train_options {
    int resume;             /* continue from out_dir/checkpoint.bin */
    int stop_after_epoch;   /* > 0: stop once this epoch is checkpointed */
    int verbose;            /* per-epoch progress on stderr */
} bbnas_train_options;

/* Writes history.csv, history.json, genotypes.jsonl, checkpoint.bin,
 * config.cfg and summary.json into out_dir. The summary JSON is returned. */
BBNAS_API bbnas_status bbnas_train(const bbnas_config* cfg, const char* out_dir,
                                   const bbnas_train_options* opts, char* buf, size_t cap,
                                   size_t* len);

/* head: "mixed", "ins" or "cls"; split: "test", "val" or "train".
 * has_mu = 0 uses the checkpoint's best validation mu. Returns JSON. */
BBNAS_API bbnas_status bbnas_eval(const char* checkpoint, int has_mu, double mu, const char* head,
                                  const char* split, char* buf, size_t cap, size_t* len);

/* grid: "a:b:step" or "m1,m2,...". Writes the CSV to out_csv; returns JSON. */
BBNAS_API bbnas_status bbnas_sweep_mu(const char* checkpoint, const char* grid,
                                      const char* out_csv, char* buf, size_t cap, size_t* len);

BBNAS_API bbnas_status bbnas_probe_theorem1(const bbnas_config* cfg, const char* mu_list,
                                            int clone_heads, const char* out_csv, char* buf,
                                            size_t cap, size_t* len);

/* Six-method comparison over configs x seeds; returns the matrix CSV. */
BBNAS_API bbnas_status bbnas_run_matrix(const char* const* config_paths, size_t n_configs,
                                        const uint64_t* seeds, size_t n_seeds,
                                        const char* out_dir, int verbose, char* buf, size_t cap,
                                        size_t* len);

/* Finite-difference suite; the report text goes to buf. */
BBNAS_API bbnas_status bbnas_gradcheck(uint64_t seed, double* max_rel_err, char* buf, size_t cap,
                                       size_t* len);

/* format: "json" or "dot". */
BBNAS_API bbnas_status bbnas_export_genotype(const char* checkpoint, const char* format,
                                             char* buf, size_t cap, size_t* len);

/* input: "synthetic:C,n,H[,channels]" or a CIFAR-10 binary directory.
 * base_count 0 keeps the smallest input class size. Writes manifest.json and
 * counts.csv into out_dir; returns the manifest. */
BBNAS_API bbnas_status bbnas_make_longtail(const char* input, double imbalance_ratio,
                                           size_t base_count, uint64_t seed, const char* out_dir,
                                           char* buf, size_t cap, size_t* len);

/* ---- trained models ----------------------------------------------------- */

typedef struct bbnas_model bbnas_model;

BBNAS_API bbnas_status bbnas_model_load(const char* checkpoint, bbnas_model** out);
BBNAS_API void bbnas_model_free(bbnas_model* model);

/* Input geometry expected by predict: channels, height (= width), classes. */
BBNAS_API bbnas_status bbnas_model_shape(const bbnas_model* model, size_t* channels,
                                         size_t* size, size_t* classes);

/* images: n * channels * size * size raw pixels in [0,1], row-major NCHW.
 * Normalization from the training run is applied internally. labels gets n
 * entries; probs (optional) gets n * classes. */
BBNAS_API bbnas_status bbnas_model_predict(const bbnas_model* model, const double* images,
                                           size_t n, double mu, int* labels, double* probs);

#ifdef __cplusplus
}
#endif

#endif /* BBNAS_BBNAS_H */
