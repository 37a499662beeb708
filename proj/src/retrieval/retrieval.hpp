#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "numerics/tensor.hpp"

namespace dvr::retrieval {

// Embedded videos in insertion order. Rows are stored L2-normalized so a
// query only needs one dot product per video.
class VideoIndex {
 public:
  VideoIndex() = default;
  // embeddings: [n x d], one nonzero row per id; ids must be unique.
  VideoIndex(std::vector<std::string> ids, const num::Tensor& embeddings);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t dim() const { return normalized_.cols(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  // Position of an id, or size() when absent.
  std::size_t find(const std::string& id) const;
  std::span<const double> row(std::size_t i) const { return normalized_.row_span(i); }

  // Cosine similarity of the query against every video.
  std::vector<double> scores(std::span<const double> query) const;

 private:
  std::vector<std::string> ids_;
  std::map<std::string, std::size_t> position_;
  num::Tensor normalized_;
};

struct Scored {
  std::size_t index = 0;
  std::string id;
  double score = 0.0;
};

// Every video sorted by cosine similarity, descending; ties by id ascending.
std::vector<Scored> rank_videos(std::span<const double> query, const VideoIndex& index);

// 1-based position the video at `target` takes in rank_videos(query, index),
// without sorting.
std::size_t rank_of(std::span<const double> query, const VideoIndex& index, std::size_t target);

inline constexpr std::size_t kDefaultCandidates = 10;

struct CandidateSet {
  std::size_t round = 0;
  std::vector<Scored> entries;
};

CandidateSet top_n(const std::vector<Scored>& ranking, std::size_t n = kDefaultCandidates, std::size_t round = 0);

// Percentage of ranks <= k.
double recall_at_k(std::span<const std::size_t> ranks, std::size_t k);

struct MeanRank {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample standard deviation / sqrt(n); 0 for n == 1
};
MeanRank mean_rank(std::span<const std::size_t> ranks);

struct RoundMetrics {
  std::size_t round = 0;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double mean_rank = 0.0;
  double mean_rank_se = 0.0;
};

struct EvalReport {
  std::size_t rounds = 0;  // T; metrics cover t = 0..T
  std::size_t index_size = 0;
  std::vector<RoundMetrics> per_round;
  // GT rank at t = 0..T for every evaluated sample.
  std::vector<std::string> sample_ids;
  std::vector<std::vector<std::size_t>> trajectories;
  std::vector<std::string> skipped;

  nlohmann::json to_json() const;
  // Columns: round,metric,value,stderr
  std::string to_csv() const;
};

// Aggregates per-sample rank trajectories (each of length rounds + 1).
EvalReport summarize(std::size_t rounds, std::size_t index_size, std::vector<std::string> sample_ids,
                     std::vector<std::vector<std::size_t>> trajectories, std::vector<std::string> skipped);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace dvr::retrieval
