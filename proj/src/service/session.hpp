#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "training/model.hpp"

namespace dvr::service {

// Immutable model plus the video collection sessions search in.
struct Engine {
  std::unique_ptr<train::RetrievalModel> model;
  std::vector<corpus::VideoRecord> videos;
  retrieval::VideoIndex index;
  std::string split;

  // An empty corpus_dir uses the one recorded in the checkpoint.
  static std::shared_ptr<Engine> open(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus_dir,
                                      const std::string& split = "test");
  static std::shared_ptr<Engine> from_model(std::unique_ptr<train::RetrievalModel> model,
                                            std::vector<corpus::VideoRecord> videos, std::string split);

  // Throws NotFound.
  std::size_t position(const std::string& video_id) const;
  const corpus::VideoRecord& video(const std::string& video_id) const { return videos[position(video_id)]; }
};

struct SessionOptions {
  std::size_t rounds = 10;
  std::size_t candidates = retrieval::kDefaultCandidates;
  // Ask the target's stored GT questions instead of decoding them.
  bool gt_questions = false;
  std::chrono::seconds ttl{30 * 60};
  std::size_t max_question_len = 20;
};

enum class Status { active, exhausted, found };
const char* status_name(Status s);

// Answers a question about a scene the way the corpus dialogs do.
class AnswerOracle {
 public:
  explicit AnswerOracle(corpus::SceneSpec scene) : scene_(std::move(scene)) {}
  static constexpr const char* kUnknown = "i don't know";
  std::string answer(const std::string& question) const;

 private:
  corpus::SceneSpec scene_;
};

struct RoundResult {
  std::size_t round = 0;
  std::string question;  // empty for round 0
  std::string answer;
  std::vector<retrieval::Scored> candidates;
  std::size_t gt_rank = 0;
};

// One retrieval dialog. Not thread-safe; SessionManager serializes access.
class Session {
 public:
  Session(const Engine& engine, const SessionOptions& options, std::string id, const std::string& caption,
          const std::string& target_id);

  // Appends [pending question, answer], re-ranks and asks the next question.
  const RoundResult& answer(const std::string& text);
  void mark_found(const std::string& video_id);

  const std::string& id() const { return id_; }
  const std::string& target_id() const { return target_id_; }
  Status status() const { return status_; }
  std::size_t rounds_done() const { return history_.size() - 1; }
  const std::vector<RoundResult>& history() const { return history_; }
  const std::string& pending_question() const { return pending_question_; }
  // History vector after the latest round.
  num::Tensor history_vector() const { return engine_.model->encoder().history(cache_); }

  nlohmann::json round_json(const RoundResult& r) const;
  nlohmann::json to_json() const;

  std::chrono::steady_clock::time_point last_used;

 private:
  void rank_and_ask();

  const Engine& engine_;
  SessionOptions options_;
  std::string id_;
  std::string target_id_;
  std::size_t target_ = 0;
  std::string caption_;
  model::HistoryEncoder::Cache cache_;
  std::vector<RoundResult> history_;
  std::string pending_question_;
  Status status_ = Status::active;
  std::optional<std::string> found_video_;
};

class SessionManager {
 public:
  SessionManager(std::shared_ptr<const Engine> engine, SessionOptions options);

  nlohmann::json start(const std::string& caption, const std::string& target_id);
  nlohmann::json answer(const std::string& session_id, const std::string& text);
  nlohmann::json get(const std::string& session_id);
  nlohmann::json found(const std::string& session_id, const std::string& video_id);
  nlohmann::json card(const std::string& video_id) const;
  nlohmann::json health() const;

  std::size_t purge_expired();
  std::size_t size() const;

 private:
  struct Entry {
    std::mutex mu;
    std::unique_ptr<Session> session;
  };
  std::shared_ptr<Entry> lookup(const std::string& session_id);

  std::shared_ptr<const Engine> engine_;
  SessionOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mt19937_64 id_rng_;
};

nlohmann::json card_json(const corpus::VideoRecord& r);

}  // namespace dvr::service
