#include "retrieval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "common/error.hpp"

namespace dvr::retrieval {

VideoIndex::VideoIndex(std::vector<std::string> ids, const num::Tensor& embeddings) : ids_(std::move(ids)) {
  if (embeddings.rows() != ids_.size()) {
    throw ShapeError("video index: " + std::to_string(ids_.size()) + " ids for " +
                     std::to_string(embeddings.rows()) + " embedding rows");
  }
  normalized_ = embeddings;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!position_.emplace(ids_[i], i).second) throw InvalidArgument("video index: duplicate id '" + ids_[i] + "'");
    auto row = normalized_.row_span(i);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericError("video index: zero embedding for '" + ids_[i] + "'");
    for (auto& v : row) v /= norm;
  }
}

std::size_t VideoIndex::find(const std::string& id) const {
  auto it = position_.find(id);
  return it == position_.end() ? ids_.size() : it->second;
}

std::vector<double> VideoIndex::scores(std::span<const double> query) const {
  if (ids_.empty()) throw InvalidArgument("rank_videos: empty index");
  if (query.size() != dim()) {
    throw ShapeError("rank_videos: query has " + std::to_string(query.size()) + " dims, index has " +
                     std::to_string(dim()));
  }
  double qn = 0.0;
  for (double v : query) qn += v * v;
  qn = std::sqrt(qn);
  if (qn == 0.0) throw NumericError("rank_videos: zero query embedding");
  std::vector<double> out(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto row = normalized_.row_span(i);
    double dot = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) dot += row[k] * query[k];
    out[i] = dot / qn;
  }
  return out;
}

namespace {

bool before(double sa, const std::string& ia, double sb, const std::string& ib) {
  return sa > sb || (sa == sb && ia < ib);
}

}  // namespace

std::vector<Scored> rank_videos(std::span<const double> query, const VideoIndex& index) {
  const auto s = index.scores(query);
  std::vector<Scored> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = {i, index.id(i), s[i]};
  std::sort(out.begin(), out.end(),
            [](const Scored& a, const Scored& b) { return before(a.score, a.id, b.score, b.id); });
  return out;
}

std::size_t rank_of(std::span<const double> query, const VideoIndex& index, std::size_t target) {
  if (target >= index.size()) throw NotFound("rank_of: target outside the index");
  const auto s = index.scores(query);
  std::size_t rank = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != target && before(s[i], index.id(i), s[target], index.id(target))) ++rank;
  }
  return rank;
}

CandidateSet top_n(const std::vector<Scored>& ranking, std::size_t n, std::size_t round) {
  if (n < 1) throw InvalidArgument("top_n: N must be >= 1");
  CandidateSet out;
  out.round = round;
  out.entries.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(std::min(n, ranking.size())));
  return out;
}

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw InvalidArgument("recall_at_k: no ranks");
  std::size_t hits = 0;
  for (auto r : ranks) {
    if (r < 1) throw InvalidArgument("recall_at_k: ranks are 1-based");
    if (r <= k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

MeanRank mean_rank(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw InvalidArgument("mean_rank: no ranks");
  const auto n = static_cast<double>(ranks.size());
  double sum = 0.0;
  for (auto r : ranks) sum += static_cast<double>(r);
  MeanRank out;
  out.mean = sum / n;
  if (ranks.size() > 1) {
    double ss = 0.0;
    for (auto r : ranks) ss += (static_cast<double>(r) - out.mean) * (static_cast<double>(r) - out.mean);
    out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

EvalReport summarize(std::size_t rounds, std::size_t index_size, std::vector<std::string> sample_ids,
                     std::vector<std::vector<std::size_t>> trajectories, std::vector<std::string> skipped) {
  if (sample_ids.size() != trajectories.size()) throw InvalidArgument("summarize: ids and trajectories differ in count");
  if (trajectories.empty()) throw InvalidArgument("evaluate: no samples with a complete dialog");
  EvalReport rep;
  rep.rounds = rounds;
  rep.index_size = index_size;
  for (std::size_t t = 0; t <= rounds; ++t) {
    std::vector<std::size_t> ranks;
    ranks.reserve(trajectories.size());
    for (const auto& tr : trajectories) {
      if (tr.size() != rounds + 1) throw InvalidArgument("summarize: trajectory length differs from rounds + 1");
      ranks.push_back(tr[t]);
    }
    const auto mr = mean_rank(ranks);
    rep.per_round.push_back(
        {t, recall_at_k(ranks, 1), recall_at_k(ranks, 5), recall_at_k(ranks, 10), mr.mean, mr.stderr_});
  }
  rep.sample_ids = std::move(sample_ids);
  rep.trajectories = std::move(trajectories);
  rep.skipped = std::move(skipped);
  return rep;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rounds_json = nlohmann::json::array();
  for (const auto& m : per_round) {
    rounds_json.push_back({{"round", m.round},
                           {"r1", m.r1},
                           {"r5", m.r5},
                           {"r10", m.r10},
                           {"mean_rank", m.mean_rank},
                           {"mean_rank_se", m.mean_rank_se}});
  }
  nlohmann::json traj = nlohmann::json::object();
  for (std::size_t i = 0; i < sample_ids.size(); ++i) traj[sample_ids[i]] = trajectories[i];
  return {{"rounds", rounds},
          {"index_size", index_size},
          {"evaluated", sample_ids.size()},
          {"skipped", skipped},
          {"per_round", rounds_json},
          {"trajectories", traj}};
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "round,metric,value,stderr\n";
  for (const auto& m : per_round) {
    out << m.round << ",R@1," << m.r1 << ",\n";
    out << m.round << ",R@5," << m.r5 << ",\n";
    out << m.round << ",R@10," << m.r10 << ",\n";
    out << m.round << ",MeanR," << m.mean_rank << ',' << m.mean_rank_se << '\n';
  }
  return out.str();
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("spearman: need two equal-length series of >= 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dvr::retrieval
