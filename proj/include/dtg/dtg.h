/* Public C interface to the dtg video-dialog library.
 *
 * Every entry point returns a dtg_status; on failure the context keeps a
 * human-readable message retrievable with dtg_ctx_error(). Strings returned
 * through out-parameters are heap-allocated and must be released with
 * dtg_string_free().
 */
#ifndef DTG_DTG_H
#define DTG_DTG_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dtg_status {
  DTG_OK = 0,
  DTG_ERR_INVALID_ARG = 1,
  DTG_ERR_RUNTIME = 2
} dtg_status;

/* Opaque handle carrying the run configuration and the last error. */
typedef struct dtg_ctx dtg_ctx;

/* Builds a context from an optional JSON config file plus optional JSON
 * overrides (either may be NULL or empty). Unknown config keys are errors. */
dtg_status dtg_ctx_create(const char* config_path, const char* overrides_json, dtg_ctx** out);
void dtg_ctx_destroy(dtg_ctx* ctx);

/* Message for the most recent failure on this context; never NULL. */
const char* dtg_ctx_error(const dtg_ctx* ctx);

const char* dtg_version(void);
void dtg_string_free(char* s);

/* Writes a full synthetic corpus ({train,val,test}.jsonl + vocab + metadata)
 * under out_dir, generated from the context's data config and seed. */
dtg_status dtg_gen_data(dtg_ctx* ctx, const char* out_dir);

/* Two-stage training over the train split of data_dir. Checkpoints and the
 * loss log land in out_dir; resume_path (may be NULL) continues a run. */
dtg_status dtg_train(dtg_ctx* ctx, const char* data_dir, const char* out_dir,
                     const char* resume_path);

/* Temporal grounding for every turn of every dialog in the split. Output is
 * tab-separated lines: video_id, turn index, tau_s, tau_e (3 decimals). */
dtg_status dtg_ground(dtg_ctx* ctx, const char* data_dir, const char* split,
                      const char* checkpoint_path, char** out_text);

/* Beam-search answer for one turn. video_id NULL/empty means the first
 * dialog; turn_idx -1 means the final turn; oracle != 0 injects ground-truth
 * intervals. Output is the detokenized answer. */
dtg_status dtg_answer(dtg_ctx* ctx, const char* data_dir, const char* split,
                      const char* checkpoint_path, const char* video_id, int turn_idx,
                      int oracle, char** out_text);

/* Full evaluation of a checkpoint on a split: ground -> select -> answer on
 * each final turn plus R@1 at IoU 0.3/0.5/0.7. Output is a one-line JSON
 * metric report. */
dtg_status dtg_evaluate(dtg_ctx* ctx, const char* data_dir, const char* split,
                        const char* checkpoint_path, int oracle, char** out_json);

/* Scores parallel plain-text token files (one sentence per line) against each
 * other. Output is a one-line JSON metric report (text metrics only). */
dtg_status dtg_eval_files(dtg_ctx* ctx, const char* hyp_path, const char* ref_path,
                          char** out_json);

/* Component ablation over the four toggle rows (none, TS, TS+VM, TS+VM+C):
 * trains and evaluates each row for each seed in the comma-separated list,
 * reporting per-metric medians as CSV. */
dtg_status dtg_ablate(dtg_ctx* ctx, const char* data_dir, const char* seeds_csv, char** out_csv);

/* Position-ratio coverage histogram (20 bins of width 0.05, percentages) over
 * a split's intervals: predicted when checkpoint_path is non-NULL, else
 * ground truth. Output is CSV. */
dtg_status dtg_stats_coverage(dtg_ctx* ctx, const char* data_dir, const char* split,
                              const char* checkpoint_path, char** out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DTG_DTG_H */
