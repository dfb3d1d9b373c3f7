#ifndef ORDREC_H
#define ORDREC_H

/* C interface to the ordrec pipeline. Every entry point returns a status
 * code; 0 is success. On failure a thread-local message is available from
 * ordrec_errmsg(). Codes match the CLI exit codes:
 *   0 ok, 1 usage error, 2 data/validation error, 3 numerical divergence. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    ORDREC_OK = 0,
    ORDREC_E_USAGE = 1,
    ORDREC_E_DATA = 2,
    ORDREC_E_NUMERIC = 3
};

const char* ordrec_version(void);

/* Message for the most recent failure on this thread. */
const char* ordrec_errmsg(void);

/* Frees strings returned through char** out parameters. */
void ordrec_free(char* p);

/* ---- synthetic data ---- */

typedef struct ordrec_gen_params {
    int32_t teams;
    int32_t stages;
    int32_t items_per_cell;
    int32_t users;
    int32_t min_orders;
    int32_t max_orders;
    double p_adv;
    double p_switch;
    int32_t views_per_order;
    uint64_t seed;
} ordrec_gen_params;

/* Writes orders.tsv, views.tsv, catalog.tsv into out_dir. */
int ordrec_gen_data(const ordrec_gen_params* p, const char* out_dir);

/* ---- corpus preparation ---- */

typedef struct ordrec_prepare_stats {
    int64_t n_order_events;
    int64_t n_view_events;
    int64_t n_users;
    int64_t n_sequences_kept;   /* after dropping single-purchase users */
    int64_t n_windows;
    int64_t n_dropped_windows;  /* label outside the output vocabulary */
    int64_t n_items;
    int64_t n_outputs;
} ordrec_prepare_stats;

/* Validates both event files, builds vocab + training windows, writes
 * vocab.tsv and windows.tsv into out_dir. cutoff_ms < 0 means no cutoff. */
int ordrec_prepare(const char* orders_path, const char* views_path, int32_t seq_len,
                   uint64_t tie_seed, int64_t cutoff_ms, const char* out_dir,
                   ordrec_prepare_stats* stats /* nullable */);

/* ---- embeddings ---- */

typedef struct ordrec_w2v_params {
    int32_t dim;
    int32_t window;
    int32_t negatives;
    int32_t epochs;
    double lr;
    int32_t min_count;
    uint64_t seed;
} ordrec_w2v_params;

int ordrec_train_embeddings(const char* views_path, const ordrec_w2v_params* p,
                            const char* out_path);

/* ---- model training ---- */

typedef struct ordrec_train_params {
    int32_t hidden1;
    int32_t hidden2;
    int32_t batch;
    int32_t epochs;       /* 0 allowed: artifact with initial weights only */
    double lr;
    double val_frac;      /* 0 disables validation */
    uint64_t seed;        /* drives weight init; shuffle stream derived */
} ordrec_train_params;

/* Called once per epoch with a finished line such as
 * "epoch=3 train_loss=1.234567 val_loss=1.345678 n_train=900 n_val=100". */
typedef void (*ordrec_epoch_fn)(void* ctx, const char* line);

/* windows_dir must contain vocab.tsv + windows.tsv from ordrec_prepare.
 * Writes the model artifact to out_path; if report_path is non-null the
 * per-epoch lines are also written there. */
int ordrec_train(const char* windows_dir, const char* embeddings_path,
                 const ordrec_train_params* p, const char* out_path,
                 const char* report_path /* nullable */,
                 ordrec_epoch_fn on_epoch /* nullable */, void* epoch_ctx);

/* ---- evaluation ---- */

/* ks: ascending cutoffs for hit@k / ndcg@k. Writes the JSON report to
 * out_path; when out_json is non-null it also receives a malloc'd copy
 * (release with ordrec_free). */
int ordrec_evaluate(const char* model_path, const char* windows_dir,
                    const int32_t* ks, int32_t n_ks, int32_t exact_wilcoxon_max_n,
                    uint64_t baseline_seed, const char* out_path,
                    char** out_json /* nullable */);

/* ---- serving ---- */

typedef struct ordrec_model ordrec_model; /* opaque */

int ordrec_model_open(const char* path, ordrec_model** out);
void ordrec_model_close(ordrec_model* m);

/* Scores a history (most recent last) and fills up to k (item, probability)
 * pairs, probability-descending, ties toward the smaller item id. items and
 * probs must hold k entries; *out_n receives the count actually written
 * (min(k, output vocabulary size)). */
int ordrec_predict(const ordrec_model* m, const int64_t* history, int32_t n_history,
                   int32_t k, int64_t* items, double* probs, int32_t* out_n);

/* Iterative prediction: the top-1 item of each step is appended to the
 * history before the next step. items/probs hold horizon*k_per_step entries,
 * laid out step-major; *out_per_step gets the per-step count. */
int ordrec_rollout(const ordrec_model* m, const int64_t* history, int32_t n_history,
                   int32_t horizon, int32_t k_per_step, int64_t* items, double* probs,
                   int32_t* out_per_step);

/* Reads `row_id<TAB>comma-separated history` rows, scores them with n_workers
 * parallel workers (each lazily loads its own model copy exactly once), and
 * writes `row_id<TAB>item:prob,...` rows (6-decimal probabilities) to
 * out_path. Output is byte-identical for any worker count. load_counts, when
 * non-null, must hold n_workers entries and receives per-worker model-load
 * counts. */
int ordrec_score_batch(const char* model_path, const char* requests_path,
                       int32_t n_workers, int32_t k, const char* out_path,
                       int64_t* load_counts /* nullable */);

/* Manifest + per-tensor L2 norms of a model or embeddings file; *out is
 * malloc'd, release with ordrec_free. */
int ordrec_inspect(const char* path, char** out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ORDREC_H */
