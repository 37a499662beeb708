#include "service/simulate.hpp"

namespace dvr::service {

nlohmann::json SimulateResult::to_json() const {
  auto j = report.to_json();
  j["questions_asked"] = questions_asked;
  j["questions_parsed"] = questions_parsed;
  j["question_parse_rate"] =
      questions_asked ? static_cast<double>(questions_parsed) / static_cast<double>(questions_asked) : 0.0;
  return j;
}

SimulateResult simulate(const Engine& engine, const SimulateOptions& options) {
  SessionOptions so;
  so.rounds = options.rounds;
  so.gt_questions = options.gt_questions;
  SimulateResult out;
  std::vector<std::string> ids, skipped;
  std::vector<std::vector<std::size_t>> traj;
  for (const auto& video : engine.videos) {
    if (options.gt_questions && video.dialog.size() < options.rounds) {
      skipped.push_back(video.id);
      continue;
    }
    const AnswerOracle oracle(video.scene);
    Session session(engine, so, "sim-" + video.id, video.caption, video.id);
    while (session.status() == Status::active) {
      const auto q = session.pending_question();
      if (!options.gt_questions) {
        ++out.questions_asked;
        if (corpus::parse_question(q)) ++out.questions_parsed;
      }
      session.answer(oracle.answer(q));
    }
    std::vector<std::size_t> ranks;
    for (const auto& r : session.history()) ranks.push_back(r.gt_rank);
    ids.push_back(video.id);
    traj.push_back(std::move(ranks));
  }
  out.report = retrieval::summarize(options.rounds, engine.index.size(), std::move(ids), std::move(traj),
                                    std::move(skipped));
  return out;
}

}  // namespace dvr::service
