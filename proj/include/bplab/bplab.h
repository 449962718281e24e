#ifndef BPLAB_H
#define BPLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Stable C surface over the training pipeline. Every call returns 0 on
 * success or a bplab_status; bplab_last_error() describes the most recent
 * failure on the calling thread. */

typedef enum bplab_status {
    BPLAB_OK = 0,
    BPLAB_INVALID_ARGUMENT = 1,
    BPLAB_GENERATION_FAILED = 2,
    BPLAB_EXPERT_FAILURE = 3,
    BPLAB_VALIDATION_FAILED = 4,
    BPLAB_VERSION_MISMATCH = 5,
    BPLAB_CORRUPT_RECORD = 6,
    BPLAB_REPLAY_DIVERGENCE = 7,
    BPLAB_SHAPE_MISMATCH = 8,
    BPLAB_INDEX_OUT_OF_RANGE = 9,
    BPLAB_NOT_SCALAR = 10,
    BPLAB_INVALID_PAIR = 11,
    BPLAB_EPISODE_TOO_SHORT = 12,
    BPLAB_DIVERGENCE = 13,
    BPLAB_MISSING_FROZEN_PARAM = 14,
    BPLAB_TASK_MISMATCH = 15,
    BPLAB_INVALID_ACTION = 16,
    BPLAB_EMPTY_DATASET = 17,
    BPLAB_IO = 18,
    BPLAB_UNKNOWN = 100
} bplab_status;

/* An experiment context: one parsed and validated configuration. */
typedef struct bplab_ctx bplab_ctx;

const char* bplab_last_error(void);
int bplab_version(void);

/* Pretraining objectives in declaration order; name is NULL out of range. */
int bplab_objective_count(void);
const char* bplab_objective_name(int index);

/* config_json: full or partial experiment config; NULL or "" for desk
 * defaults. Unknown keys are ignored, missing keys keep defaults. */
int bplab_ctx_create(const char* config_json, bplab_ctx** out);
void bplab_ctx_destroy(bplab_ctx* ctx);

/* Canonical serialization of the held config. Writes up to cap bytes
 * including the terminator; *written gets the full length either way. */
int bplab_ctx_config_json(const bplab_ctx* ctx, char* buf, size_t cap, size_t* written);
uint64_t bplab_ctx_fingerprint(const bplab_ctx* ctx);

/* Generates the expert dataset for a task ("explore" | "objectnav" |
 * "leavereturn") into out_dir, plus the exact config used as config.json.
 * houses == 0 and seed == 0 fall back to the context values. */
int bplab_gen_data(bplab_ctx* ctx, const char* task, int houses, uint64_t seed,
                   const char* out_dir);

/* Pretrains one objective on exploration data and writes the best-validation
 * checkpoint. metrics_path may be NULL. Out params may be NULL. */
int bplab_pretrain(bplab_ctx* ctx, const char* objective, const char* data_dir,
                   const char* ckpt_path, const char* metrics_path, double* best_metric);

/* Frozen transfer of a pretrained checkpoint to one downstream dataset.
 * rep_name labels the results row (NULL uses the checkpoint's objective, or
 * "end-to-end"). Appends to results_dir/records.jsonl when results_dir is
 * non-NULL. */
int bplab_transfer(bplab_ctx* ctx, const char* ckpt_path, const char* task_data_dir, int seed_tag,
                   int end_to_end, const char* rep_name, const char* results_dir,
                   const char* metrics_path, double* eval_accuracy);

/* Count-based baselines: builds modal tables from the exploration data and
 * evaluates all three baselines on the task data, appending records. */
int bplab_baselines(bplab_ctx* ctx, const char* pretrain_data_dir, const char* task_data_dir,
                    const char* results_dir, double* move_ahead, double* modal_a,
                    double* modal_t);

/* Finite-difference audit at tiny dims; fills the worst relative error. */
int bplab_gradcheck(const char* objective, double* max_rel_err);

/* Renders records.jsonl under results_dir. Either output path may be NULL. */
int bplab_report(const char* results_dir, const char* csv_path, const char* text_path);

#ifdef __cplusplus
}
#endif

#endif /* BPLAB_H */
