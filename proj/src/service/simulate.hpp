#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "service/session.hpp"

namespace dvr::service {

struct SimulateOptions {
  std::size_t rounds = 10;
  // Stored GT questions (answered by the oracle) instead of decoded ones.
  bool gt_questions = true;
};

struct SimulateResult {
  retrieval::EvalReport report;
  // Decoded questions asked and how many of them matched a template.
  std::size_t questions_asked = 0;
  std::size_t questions_parsed = 0;
  nlohmann::json to_json() const;
};

// Runs one oracle-answered session per video of the engine, each starting
// from the video's GT caption.
SimulateResult simulate(const Engine& engine, const SimulateOptions& options);

}  // namespace dvr::service
