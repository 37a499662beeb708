#ifndef DVR_DVR_H
#define DVR_DVR_H

/* C interface of the dialog-based video retrieval engine.
 *
 * Every call returns a dvr_status. On failure dvr_last_error() returns a
 * message for the calling thread. Strings returned through char** outputs
 * are owned by the caller and released with dvr_string_free(). */

#ifdef __cplusplus
extern "C" {
#endif

#if defined(DVR_BUILDING_LIBRARY)
#define DVR_API __attribute__((visibility("default")))
#else
#define DVR_API
#endif

typedef enum dvr_status {
  DVR_OK = 0,
  DVR_ERR_INVALID_ARGUMENT = 1,
  DVR_ERR_SHAPE = 2,
  DVR_ERR_NUMERIC = 3,
  DVR_ERR_NOT_FOUND = 4,
  DVR_ERR_CONFLICT = 5,
  DVR_ERR_IO = 6,
  DVR_ERR_INTERNAL = 7
} dvr_status;

typedef struct dvr_engine dvr_engine;

DVR_API const char* dvr_version(void);
DVR_API const char* dvr_status_name(dvr_status status);
DVR_API const char* dvr_last_error(void);
DVR_API void dvr_string_free(char* s);

/* config_json: corpus config keys (seed, train_size, ...); NULL for defaults.
 * Writes dataset.jsonl, manifest.json and vocab.json into out_dir. */
DVR_API dvr_status dvr_generate_corpus(const char* config_json, const char* out_dir);

/* Two-phase training on the corpus in corpus_dir. config_json holds the
 * training config (NULL for defaults). Writes checkpoint.bin, train_log.csv,
 * config.json and summary.json into out_dir; summary_json (optional) receives
 * the training summary. */
DVR_API dvr_status dvr_train(const char* corpus_dir, const char* config_json, const char* out_dir,
                             char** summary_json);

/* Trains proposed, basic, basic+l2 and flat and writes baselines.json and
 * baseline_curves.csv into out_dir; table_json (optional) receives the table. */
DVR_API dvr_status dvr_baselines(const char* corpus_dir, const char* config_json, const char* out_dir,
                                 char** table_json);

/* corpus_dir may be NULL to use the corpus recorded by dvr_train.
 * options_json keys: split ("test"), rounds (10), candidates (10),
 * gt_questions (false), ttl_seconds (1800), max_question_len (20). */
DVR_API dvr_status dvr_engine_open(const char* checkpoint_path, const char* corpus_dir, const char* options_json,
                                   dvr_engine** out);
DVR_API void dvr_engine_close(dvr_engine* engine);

/* Per-round metrics over the engine's split with GT dialogs. */
DVR_API dvr_status dvr_evaluate(dvr_engine* engine, unsigned rounds, char** report_json, char** report_csv);

/* Oracle-answered sessions for every video of the split. gt_questions != 0
 * asks the stored GT questions. */
DVR_API dvr_status dvr_simulate(dvr_engine* engine, unsigned rounds, int gt_questions, char** report_json,
                                char** report_csv);

DVR_API dvr_status dvr_session_start(dvr_engine* engine, const char* caption, const char* target_id,
                                     char** payload_json);
DVR_API dvr_status dvr_session_answer(dvr_engine* engine, const char* session_id, const char* text,
                                      char** payload_json);
DVR_API dvr_status dvr_session_get(dvr_engine* engine, const char* session_id, char** payload_json);
DVR_API dvr_status dvr_session_found(dvr_engine* engine, const char* session_id, const char* video_id,
                                     char** payload_json);
DVR_API dvr_status dvr_video_card(dvr_engine* engine, const char* video_id, char** payload_json);

/* Serves the HTTP API until the process is interrupted. port 0 picks a free
 * port; the bound port is printed to stdout. static_dir may be NULL. */
DVR_API dvr_status dvr_serve(dvr_engine* engine, const char* host, int port, const char* static_dir);

#ifdef __cplusplus
}
#endif

#endif
