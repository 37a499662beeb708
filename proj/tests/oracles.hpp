#pragma once

// Brute-force reference implementations used to cross-check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

inline double weight(std::size_t r, std::size_t n) { return 1.0 + 1.0 / (static_cast<double>(n) - static_cast<double>(r) + 1.0); }

// Indices 0..n-1 sorted by score descending, lower index first on ties.
inline std::vector<std::size_t> order_by_score(const std::vector<double>& score) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return idx;
}

struct Ranking {
  Matrix sim;  // sim[i][j] = cos(video i, dialog j)
  std::vector<std::size_t> hard_dialog, hard_video, rank_v, rank_s;
  std::vector<double> term_v, term_s;
  double loss = 0.0;
};

inline Ranking ranking(const Matrix& dialog, const Matrix& video, double margin) {
  const auto n = dialog.size();
  Ranking r;
  r.sim.assign(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r.sim[i][j] = cosine(video[i], dialog[j]);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n), col(n);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = r.sim[i][j];
      col[j] = r.sim[j][i];
    }
    const auto ro = order_by_score(row);
    const auto co = order_by_score(col);
    r.rank_v.push_back(static_cast<std::size_t>(std::find(ro.begin(), ro.end(), i) - ro.begin()) + 1);
    r.rank_s.push_back(static_cast<std::size_t>(std::find(co.begin(), co.end(), i) - co.begin()) + 1);
    r.hard_dialog.push_back(ro[0] == i ? ro[1] : ro[0]);
    r.hard_video.push_back(co[0] == i ? co[1] : co[0]);
    const double pos = r.sim[i][i];
    r.term_v.push_back(weight(r.rank_v.back(), n) * std::max(0.0, margin - pos + r.sim[i][r.hard_dialog.back()]));
    r.term_s.push_back(weight(r.rank_s.back(), n) * std::max(0.0, margin - pos + r.sim[r.hard_video.back()][i]));
    r.loss += r.term_v.back() + r.term_s.back();
  }
  return r;
}

// Full sort of (score desc, id asc); returns the 1-based position of target.
inline std::size_t rank_by_sort(const std::vector<double>& score, const std::vector<std::string>& ids,
                                std::size_t target) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return ids[a] < ids[b];
  });
  return static_cast<std::size_t>(std::find(idx.begin(), idx.end(), target) - idx.begin()) + 1;
}

inline double recall(const std::vector<std::size_t>& ranks, std::size_t k) {
  double hits = 0;
  for (auto r : ranks) hits += r <= k ? 1.0 : 0.0;
  return 100.0 * hits / static_cast<double>(ranks.size());
}

inline double mean(const std::vector<std::size_t>& ranks) {
  double s = 0;
  for (auto r : ranks) s += static_cast<double>(r);
  return s / static_cast<double>(ranks.size());
}

}  // namespace oracle
