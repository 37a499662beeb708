#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>

#include "dvr/dvr.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define EXPECT_OK(call)                                                                      \
  do {                                                                                       \
    dvr_status s_ = (call);                                                                  \
    if (s_ != DVR_OK) {                                                                      \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call, dvr_status_name(s_), \
              dvr_last_error());                                                             \
      ++failures;                                                                            \
    }                                                                                        \
  } while (0)

/* Copies the string value of "key" out of a flat JSON text. */
static void json_string(const char* json, const char* key, char* out, size_t cap) {
  char pattern[64];
  snprintf(pattern, sizeof pattern, "\"%s\":\"", key);
  const char* p = strstr(json, pattern);
  out[0] = '\0';
  if (!p) return;
  p += strlen(pattern);
  size_t n = 0;
  while (p[n] && p[n] != '"' && n + 1 < cap) {
    out[n] = p[n];
    ++n;
  }
  out[n] = '\0';
}

int main(int argc, char** argv) {
  const char* work = argc > 1 ? argv[1] : "capi_work";
  char corpus[512], run[512], ckpt[600];
  mkdir(work, 0755);
  snprintf(corpus, sizeof corpus, "%s/corpus", work);
  snprintf(run, sizeof run, "%s/run", work);
  snprintf(ckpt, sizeof ckpt, "%s/checkpoint.bin", run);

  EXPECT(strlen(dvr_version()) > 0);
  EXPECT(strcmp(dvr_status_name(DVR_ERR_NOT_FOUND), "not_found") == 0);

  EXPECT(dvr_generate_corpus("{\"train_size\": ", corpus) == DVR_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(dvr_last_error()) > 0);
  EXPECT(dvr_generate_corpus(NULL, NULL) == DVR_ERR_INVALID_ARGUMENT);
  EXPECT_OK(dvr_generate_corpus("{\"train_size\": 24, \"val_size\": 8, \"test_size\": 12, \"seed\": 5}", corpus));

  char* summary = NULL;
  EXPECT(dvr_train("/nonexistent/corpus", NULL, run, NULL) == DVR_ERR_IO);
  EXPECT(dvr_train(corpus, "{\"no_such_key\": 1}", run, NULL) == DVR_ERR_INVALID_ARGUMENT);
  EXPECT_OK(dvr_train(corpus,
                      "{\"batch_size\": 8, \"phase1_epochs\": 1, \"phase2_epochs\": 1, \"steps_per_epoch\": 2,"
                      " \"dims\": {\"word_dim\": 6, \"hidden_dim\": 5, \"decoder_dim\": 7, \"joint_dim\": 6}}",
                      run, &summary));
  EXPECT(summary && strstr(summary, "best_val_mean_rank"));
  dvr_string_free(summary);

  dvr_engine* engine = NULL;
  EXPECT(dvr_engine_open("/nonexistent.bin", NULL, NULL, &engine) == DVR_ERR_IO);
  EXPECT(engine == NULL);
  EXPECT(dvr_engine_open(ckpt, NULL, "{\"split\": \"dev\"}", &engine) == DVR_ERR_INVALID_ARGUMENT);
  EXPECT_OK(dvr_engine_open(ckpt, NULL, "{\"gt_questions\": true, \"rounds\": 2}", &engine));
  if (!engine) return 1;

  char* report = NULL;
  char* csv = NULL;
  EXPECT_OK(dvr_evaluate(engine, 10, &report, &csv));
  EXPECT(report && strstr(report, "\"per_round\""));
  EXPECT(csv && strncmp(csv, "round,metric,value,stderr", 25) == 0);
  dvr_string_free(report);
  dvr_string_free(csv);
  EXPECT_OK(dvr_simulate(engine, 10, 1, &report, NULL));
  EXPECT(report && strstr(report, "question_parse_rate"));
  dvr_string_free(report);

  char* card = NULL;
  EXPECT_OK(dvr_video_card(engine, "v00032", &card));
  char caption[256];
  json_string(card, "caption", caption, sizeof caption);
  EXPECT(strlen(caption) > 0);
  dvr_string_free(card);
  EXPECT(dvr_video_card(engine, "v99999", &card) == DVR_ERR_NOT_FOUND);

  char* payload = NULL;
  EXPECT_OK(dvr_session_start(engine, caption, "v00032", &payload));
  char sid[64];
  json_string(payload, "session_id", sid, sizeof sid);
  EXPECT(sid[0] == 's');
  dvr_string_free(payload);
  EXPECT_OK(dvr_session_answer(engine, sid, "one person", &payload));
  dvr_string_free(payload);
  EXPECT_OK(dvr_session_answer(engine, sid, "no", &payload));
  EXPECT(strstr(payload, "\"status\":\"exhausted\"") != NULL);
  dvr_string_free(payload);
  EXPECT(dvr_session_answer(engine, sid, "no", &payload) == DVR_ERR_CONFLICT);
  EXPECT(dvr_session_found(engine, sid, "v00032", &payload) == DVR_ERR_CONFLICT);
  EXPECT_OK(dvr_session_get(engine, sid, &payload));
  EXPECT(strstr(payload, "\"rank_trajectory\"") != NULL);
  dvr_string_free(payload);
  EXPECT(dvr_session_get(engine, "missing", &payload) == DVR_ERR_NOT_FOUND);
  EXPECT(dvr_session_start(engine, "", "v00032", &payload) == DVR_ERR_INVALID_ARGUMENT);

  EXPECT_OK(dvr_session_start(engine, caption, "v00032", &payload));
  json_string(payload, "session_id", sid, sizeof sid);
  dvr_string_free(payload);
  EXPECT_OK(dvr_session_found(engine, sid, "v00032", &payload));
  EXPECT(strstr(payload, "\"correct\":true") != NULL);
  dvr_string_free(payload);

  dvr_engine_close(engine);
  dvr_string_free(NULL);

  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
