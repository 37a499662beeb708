#include "service/session.hpp"

#include <cstdio>
#include <random>

#include "common/error.hpp"

namespace dvr::service {

using nlohmann::json;

std::shared_ptr<Engine> Engine::open(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus_dir,
                                     const std::string& split) {
  auto loaded = train::load_checkpoint(checkpoint);
  auto dir = corpus_dir;
  if (dir.empty()) {
    if (!loaded.extra.contains("corpus_dir")) throw InvalidArgument("no corpus directory given or recorded in the checkpoint");
    dir = loaded.extra.at("corpus_dir").get<std::string>();
  }
  auto corpus = corpus::read_corpus(dir);
  auto records = corpus.split(split);
  return from_model(std::move(loaded.model), std::move(records), split);
}

std::shared_ptr<Engine> Engine::from_model(std::unique_ptr<train::RetrievalModel> model,
                                           std::vector<corpus::VideoRecord> videos, std::string split) {
  if (videos.empty()) throw InvalidArgument("engine: split '" + split + "' has no videos");
  auto e = std::make_shared<Engine>();
  e->index = model->build_index(videos);
  e->model = std::move(model);
  e->videos = std::move(videos);
  e->split = std::move(split);
  return e;
}

std::size_t Engine::position(const std::string& video_id) const {
  const auto p = index.find(video_id);
  if (p == index.size()) throw NotFound("unknown video '" + video_id + "'");
  return p;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::active: return "active";
    case Status::exhausted: return "exhausted";
    case Status::found: return "found";
  }
  return "unknown";
}

std::string AnswerOracle::answer(const std::string& question) const {
  const auto parsed = corpus::parse_question(question);
  if (!parsed) return kUnknown;
  return corpus::answer_text(parsed->template_index, scene_);
}

json card_json(const corpus::VideoRecord& r) {
  return {{"video_id", r.id}, {"caption", r.caption}, {"scene", r.scene}};
}

Session::Session(const Engine& engine, const SessionOptions& options, std::string id, const std::string& caption,
                 const std::string& target_id)
    : engine_(engine), options_(options), id_(std::move(id)), target_id_(target_id), caption_(caption) {
  target_ = engine.position(target_id);
  const auto& model = *engine.model;
  const auto seq = model.vocab().encode(caption);
  if (seq.empty()) throw InvalidArgument("caption is empty");
  num::Tape tape;
  cache_ = model.encoder().start(tape, model.embedding(tape), seq);
  history_.push_back({});
  rank_and_ask();
  last_used = std::chrono::steady_clock::now();
}

void Session::rank_and_ask() {
  const auto& model = *engine_.model;
  auto& r = history_.back();
  r.round = rounds_done();
  const auto joint = model.embed_history(history_vector());
  const auto ranking = retrieval::rank_videos(joint.row_span(0), engine_.index);
  r.candidates = retrieval::top_n(ranking, options_.candidates, r.round).entries;
  r.gt_rank = retrieval::rank_of(joint.row_span(0), engine_.index, target_);
  if (r.round >= options_.rounds) {
    status_ = Status::exhausted;
    pending_question_.clear();
    return;
  }
  if (options_.gt_questions) {
    const auto& dialog = engine_.videos[target_].dialog;
    pending_question_ = r.round < dialog.size() ? dialog[r.round].question : std::string(AnswerOracle::kUnknown);
  } else {
    pending_question_ = model.generate_question(history_vector(), options_.max_question_len);
  }
}

const RoundResult& Session::answer(const std::string& text) {
  if (status_ != Status::active) {
    throw Conflict("session " + id_ + " is " + status_name(status_) + " and takes no more answers");
  }
  const auto& model = *engine_.model;
  const auto round = model.encode_round(pending_question_, text);
  num::Tape tape;
  model.encoder().extend(tape, model.embedding(tape), cache_, round);
  history_.push_back({});
  history_.back().question = pending_question_;
  history_.back().answer = text;
  rank_and_ask();
  last_used = std::chrono::steady_clock::now();
  return history_.back();
}

void Session::mark_found(const std::string& video_id) {
  if (status_ != Status::active) throw Conflict("session " + id_ + " is already " + status_name(status_));
  engine_.position(video_id);
  found_video_ = video_id;
  status_ = Status::found;
  last_used = std::chrono::steady_clock::now();
}

json Session::round_json(const RoundResult& r) const {
  json cands = json::array();
  for (const auto& c : r.candidates) {
    const auto& v = engine_.videos[c.index];
    cands.push_back({{"video_id", c.id}, {"score", c.score}, {"caption", v.caption}, {"scene", v.scene}});
  }
  const bool latest = &r == &history_.back();
  json out = {{"session_id", id_},
              {"round", r.round},
              {"candidates", cands},
              {"gt_rank", r.gt_rank},
              {"status", status_name(status_)},
              {"question", latest && !pending_question_.empty() ? json(pending_question_) : json(nullptr)}};
  if (r.round > 0) {
    out["asked"] = r.question;
    out["answer"] = r.answer;
  }
  return out;
}

json Session::to_json() const {
  json rounds = json::array();
  json ranks = json::array();
  for (const auto& r : history_) {
    json c = json::array();
    for (const auto& e : r.candidates) c.push_back({{"video_id", e.id}, {"score", e.score}});
    json entry = {{"round", r.round}, {"candidates", c}, {"gt_rank", r.gt_rank}};
    if (r.round > 0) {
      entry["question"] = r.question;
      entry["answer"] = r.answer;
    }
    rounds.push_back(entry);
    ranks.push_back(r.gt_rank);
  }
  return {{"session_id", id_},
          {"target_id", target_id_},
          {"caption", caption_},
          {"status", status_name(status_)},
          {"max_rounds", options_.rounds},
          {"rounds", rounds},
          {"rank_trajectory", ranks},
          {"pending_question", pending_question_.empty() ? json(nullptr) : json(pending_question_)},
          {"found_video_id", found_video_ ? json(*found_video_) : json(nullptr)}};
}

SessionManager::SessionManager(std::shared_ptr<const Engine> engine, SessionOptions options)
    : engine_(std::move(engine)), options_(options), id_rng_(std::random_device{}()) {
  if (!engine_) throw InvalidArgument("session manager: no engine");
  if (options_.rounds == 0) throw InvalidArgument("session manager: rounds must be >= 1");
}

json SessionManager::start(const std::string& caption, const std::string& target_id) {
  purge_expired();
  std::string id;
  {
    std::lock_guard lock(mu_);
    do {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "s%016llx", static_cast<unsigned long long>(id_rng_()));
      id = buf;
    } while (sessions_.contains(id));
  }
  auto entry = std::make_shared<Entry>();
  entry->session = std::make_unique<Session>(*engine_, options_, id, caption, target_id);
  auto payload = entry->session->round_json(entry->session->history().back());
  payload["target_id"] = target_id;
  payload["max_rounds"] = options_.rounds;
  std::lock_guard lock(mu_);
  sessions_.emplace(id, std::move(entry));
  return payload;
}

std::shared_ptr<SessionManager::Entry> SessionManager::lookup(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + session_id + "'");
  return it->second;
}

json SessionManager::answer(const std::string& session_id, const std::string& text) {
  auto e = lookup(session_id);
  std::lock_guard lock(e->mu);
  return e->session->round_json(e->session->answer(text));
}

json SessionManager::get(const std::string& session_id) {
  auto e = lookup(session_id);
  std::lock_guard lock(e->mu);
  e->session->last_used = std::chrono::steady_clock::now();
  return e->session->to_json();
}

json SessionManager::found(const std::string& session_id, const std::string& video_id) {
  auto e = lookup(session_id);
  std::lock_guard lock(e->mu);
  e->session->mark_found(video_id);
  auto out = e->session->to_json();
  out["correct"] = video_id == e->session->target_id();
  return out;
}

json SessionManager::card(const std::string& video_id) const { return card_json(engine_->video(video_id)); }

json SessionManager::health() const {
  return {{"status", "ok"},
          {"videos", engine_->videos.size()},
          {"split", engine_->split},
          {"variant", model::variant_name(engine_->model->config().variant)},
          {"sessions", size()}};
}

std::size_t SessionManager::purge_expired() {
  const auto now = std::chrono::steady_clock::now();
  std::lock_guard lock(mu_);
  std::size_t removed = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock slock(it->second->mu, std::try_to_lock);
    if (slock.owns_lock() && now - it->second->session->last_used > options_.ttl) {
      slock.unlock();
      it = sessions_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace dvr::service
