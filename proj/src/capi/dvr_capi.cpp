#include "dvr/dvr.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "corpus/corpus.hpp"
#include "service/http_server.hpp"
#include "service/simulate.hpp"
#include "training/trainer.hpp"

using nlohmann::json;

struct dvr_engine {
  std::shared_ptr<const dvr::service::Engine> engine;
  dvr::service::SessionOptions options;
  std::unique_ptr<dvr::service::SessionManager> sessions;
};

namespace {

thread_local std::string last_error;

dvr_status fail(dvr_status s, const char* what) {
  last_error = what;
  return s;
}

template <class F>
dvr_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return DVR_OK;
  } catch (const dvr::ShapeError& e) {
    return fail(DVR_ERR_SHAPE, e.what());
  } catch (const dvr::NumericError& e) {
    return fail(DVR_ERR_NUMERIC, e.what());
  } catch (const dvr::NotFound& e) {
    return fail(DVR_ERR_NOT_FOUND, e.what());
  } catch (const dvr::Conflict& e) {
    return fail(DVR_ERR_CONFLICT, e.what());
  } catch (const dvr::IoError& e) {
    return fail(DVR_ERR_IO, e.what());
  } catch (const dvr::InvalidArgument& e) {
    return fail(DVR_ERR_INVALID_ARGUMENT, e.what());
  } catch (const json::exception& e) {
    return fail(DVR_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(DVR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DVR_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

json parse_optional(const char* text) {
  if (!text || !*text) return json::object();
  auto j = json::parse(text);
  if (!j.is_object()) throw dvr::InvalidArgument("config must be a JSON object");
  return j;
}

void require(const void* p, const char* name) {
  if (!p) throw dvr::InvalidArgument(std::string(name) + " is NULL");
}

dvr::text::Vocabulary corpus_vocab(const std::filesystem::path& dir) {
  return dvr::text::Vocabulary::load(dir / "vocab.json");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw dvr::IoError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

extern "C" {

const char* dvr_version(void) { return "0.1.0"; }

const char* dvr_status_name(dvr_status status) {
  switch (status) {
    case DVR_OK: return "ok";
    case DVR_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case DVR_ERR_SHAPE: return "shape_error";
    case DVR_ERR_NUMERIC: return "numeric_error";
    case DVR_ERR_NOT_FOUND: return "not_found";
    case DVR_ERR_CONFLICT: return "conflict";
    case DVR_ERR_IO: return "io_error";
    case DVR_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* dvr_last_error(void) { return last_error.c_str(); }

void dvr_string_free(char* s) { std::free(s); }

dvr_status dvr_generate_corpus(const char* config_json, const char* out_dir) {
  return guard([&] {
    require(out_dir, "out_dir");
    auto cfg = parse_optional(config_json).get<dvr::corpus::CorpusConfig>();
    dvr::corpus::write_corpus(dvr::corpus::build_corpus(cfg), out_dir);
  });
}

dvr_status dvr_train(const char* corpus_dir, const char* config_json, const char* out_dir, char** summary_json) {
  return guard([&] {
    require(corpus_dir, "corpus_dir");
    require(out_dir, "out_dir");
    auto cfg = parse_optional(config_json).get<dvr::train::TrainConfig>();
    const auto corpus = dvr::corpus::read_corpus(corpus_dir);
    const auto res = dvr::train::train_two_phase(corpus, corpus_vocab(corpus_dir), cfg);
    dvr::train::write_training_outputs(res, cfg, out_dir,
                                      {{"corpus_dir", std::filesystem::absolute(corpus_dir).string()}});
    put(summary_json, res.summary().dump());
  });
}

dvr_status dvr_baselines(const char* corpus_dir, const char* config_json, const char* out_dir, char** table_json) {
  return guard([&] {
    require(corpus_dir, "corpus_dir");
    require(out_dir, "out_dir");
    auto cfg = parse_optional(config_json).get<dvr::train::TrainConfig>();
    const auto corpus = dvr::corpus::read_corpus(corpus_dir);
    const auto rows = dvr::train::run_baseline_suite(corpus, corpus_vocab(corpus_dir), cfg);
    std::filesystem::create_directories(out_dir);
    const auto table = dvr::train::suite_table(rows);
    write_text(std::filesystem::path(out_dir) / "baselines.json", table.dump(2) + "\n");
    write_text(std::filesystem::path(out_dir) / "baseline_curves.csv", dvr::train::suite_curves_csv(rows));
    put(table_json, table.dump());
  });
}

dvr_status dvr_engine_open(const char* checkpoint_path, const char* corpus_dir, const char* options_json,
                           dvr_engine** out) {
  return guard([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = nullptr;
    const auto opts = parse_optional(options_json);
    auto handle = std::make_unique<dvr_engine>();
    const dvr::service::SessionOptions def;
    handle->options.rounds = opts.value("rounds", def.rounds);
    handle->options.candidates = opts.value("candidates", def.candidates);
    handle->options.gt_questions = opts.value("gt_questions", def.gt_questions);
    handle->options.ttl = std::chrono::seconds(opts.value("ttl_seconds", static_cast<long>(def.ttl.count())));
    handle->options.max_question_len = opts.value("max_question_len", def.max_question_len);
    handle->engine = dvr::service::Engine::open(checkpoint_path, corpus_dir ? corpus_dir : "", opts.value("split", std::string("test")));
    handle->sessions = std::make_unique<dvr::service::SessionManager>(handle->engine, handle->options);
    *out = handle.release();
  });
}

void dvr_engine_close(dvr_engine* engine) { delete engine; }

dvr_status dvr_evaluate(dvr_engine* engine, unsigned rounds, char** report_json, char** report_csv) {
  return guard([&] {
    require(engine, "engine");
    const auto rep = dvr::train::evaluate_rounds(*engine->engine->model, engine->engine->videos, rounds);
    put(report_json, rep.to_json().dump());
    put(report_csv, rep.to_csv());
  });
}

dvr_status dvr_simulate(dvr_engine* engine, unsigned rounds, int gt_questions, char** report_json,
                        char** report_csv) {
  return guard([&] {
    require(engine, "engine");
    dvr::service::SimulateOptions o;
    o.rounds = rounds;
    o.gt_questions = gt_questions != 0;
    const auto res = dvr::service::simulate(*engine->engine, o);
    put(report_json, res.to_json().dump());
    put(report_csv, res.report.to_csv());
  });
}

dvr_status dvr_session_start(dvr_engine* engine, const char* caption, const char* target_id, char** payload_json) {
  return guard([&] {
    require(engine, "engine");
    require(caption, "caption");
    require(target_id, "target_id");
    put(payload_json, engine->sessions->start(caption, target_id).dump());
  });
}

dvr_status dvr_session_answer(dvr_engine* engine, const char* session_id, const char* text, char** payload_json) {
  return guard([&] {
    require(engine, "engine");
    require(session_id, "session_id");
    require(text, "text");
    put(payload_json, engine->sessions->answer(session_id, text).dump());
  });
}

dvr_status dvr_session_get(dvr_engine* engine, const char* session_id, char** payload_json) {
  return guard([&] {
    require(engine, "engine");
    require(session_id, "session_id");
    put(payload_json, engine->sessions->get(session_id).dump());
  });
}

dvr_status dvr_session_found(dvr_engine* engine, const char* session_id, const char* video_id,
                             char** payload_json) {
  return guard([&] {
    require(engine, "engine");
    require(session_id, "session_id");
    require(video_id, "video_id");
    put(payload_json, engine->sessions->found(session_id, video_id).dump());
  });
}

dvr_status dvr_video_card(dvr_engine* engine, const char* video_id, char** payload_json) {
  return guard([&] {
    require(engine, "engine");
    require(video_id, "video_id");
    put(payload_json, engine->sessions->card(video_id).dump());
  });
}

dvr_status dvr_serve(dvr_engine* engine, const char* host, int port, const char* static_dir) {
  return guard([&] {
    require(engine, "engine");
    dvr::service::HttpService http(engine->engine, engine->options, static_dir ? static_dir : "");
    const int bound = http.bind(host ? host : "127.0.0.1", port);
    std::cout << "listening on " << (host ? host : "127.0.0.1") << ":" << bound << std::endl;
    http.run();
  });
}

}  // extern "C"
