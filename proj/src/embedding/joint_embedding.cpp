#include "embedding/joint_embedding.hpp"

#include <cmath>

#include "common/error.hpp"

namespace dvr::embed {

using num::Tape;
using num::Tensor;
using num::Var;

AffineEmbedding::AffineEmbedding(num::ParameterStore& store, const std::string& prefix, const std::string& group,
                                 std::size_t input_dim, std::size_t joint_dim, std::mt19937_64& rng)
    : input_dim_(input_dim), joint_dim_(joint_dim) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  weight_ = &store.add_uniform(prefix + ".weight", group, {input_dim, joint_dim}, bound, rng);
  bias_ = &store.add_uniform(prefix + ".bias", group, {1, joint_dim}, bound, rng);
}

Var AffineEmbedding::apply(Tape& tape, Var x) const {
  if (x.value().cols() != input_dim_) {
    throw ShapeError("embedding: input has " + std::to_string(x.value().cols()) + " dims, expected " +
                     std::to_string(input_dim_));
  }
  return num::add(num::matmul(x, tape.leaf(*weight_)), tape.leaf(*bias_));
}

double similarity(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("similarity: dimension mismatch");
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) throw NumericError("similarity: cosine undefined for a zero vector");
  return xy / (std::sqrt(xx) * std::sqrt(yy));
}

double rank_weight(std::size_t r, std::size_t n) {
  if (r < 1 || r > n) {
    throw InvalidArgument("rank_weight: rank " + std::to_string(r) + " outside [1, " + std::to_string(n) + "]");
  }
  return 1.0 + 1.0 / static_cast<double>(n - r + 1);
}

void LossConfig::validate() const {
  if (!(margin > 0.0)) throw InvalidArgument("loss config: margin must be > 0");
  if (a < 0.0 || b < 0.0) throw InvalidArgument("loss config: a and b must be >= 0");
}

RankingBatch mine_batch(const Tensor& sim) {
  const auto n = sim.rows();
  if (sim.cols() != n) throw ShapeError("mine_batch: similarity matrix must be square");
  if (n < 2) throw InvalidArgument("ranking loss needs a batch of at least 2 (no negatives)");
  RankingBatch b;
  b.size = n;
  b.hard_dialog.resize(n);
  b.hard_video.resize(n);
  b.rank_v.resize(n);
  b.rank_s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = sim(i, i);
    std::size_t best_row = n, best_col = n;
    std::size_t above_row = 0, above_col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double r = sim(i, j);  // video i against dialog j
      const double c = sim(j, i);  // dialog i against video j
      if (best_row == n || r > sim(i, best_row)) best_row = j;
      if (best_col == n || c > sim(best_col, i)) best_col = j;
      if (r > pos || (r == pos && j < i)) ++above_row;
      if (c > pos || (c == pos && j < i)) ++above_col;
    }
    b.hard_dialog[i] = best_row;
    b.hard_video[i] = best_col;
    b.rank_v[i] = above_row + 1;
    b.rank_s[i] = above_col + 1;
  }
  return b;
}

RankingLoss ranking_loss(Var dialog, Var video, const LossConfig& cfg) {
  cfg.validate();
  if (dialog.shape() != video.shape()) {
    throw ShapeError("ranking_loss: dialog " + num::shape_str(dialog.shape()) + " vs video " +
                     num::shape_str(video.shape()));
  }
  auto& tape = *dialog.tape();
  RankingLoss out;
  out.sim = num::cosine_matrix(video, dialog);
  out.batch = mine_batch(out.sim.value());
  const auto n = out.batch.size;

  std::vector<std::pair<std::size_t, std::size_t>> diag, neg_v, neg_s;
  Tensor w_v(num::Shape{n}), w_s(num::Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    diag.emplace_back(i, i);
    neg_v.emplace_back(i, out.batch.hard_dialog[i]);
    neg_s.emplace_back(out.batch.hard_video[i], i);
    w_v[i] = rank_weight(out.batch.rank_v[i], n);
    w_s[i] = rank_weight(out.batch.rank_s[i], n);
  }
  auto pos = num::gather_elements(out.sim, diag);
  auto margin = tape.constant(Tensor(num::Shape{n}, cfg.margin));
  auto hinge_v = num::relu(margin - pos + num::gather_elements(out.sim, neg_v));
  auto hinge_s = num::relu(margin - pos + num::gather_elements(out.sim, neg_s));
  out.loss = num::add(num::sum(hinge_v * tape.constant(std::move(w_v))), num::sum(hinge_s * tape.constant(std::move(w_s))));
  return out;
}

Var l2_loss(Var dialog, Var video) {
  if (dialog.shape() != video.shape()) {
    throw ShapeError("l2_loss: dialog " + num::shape_str(dialog.shape()) + " vs video " + num::shape_str(video.shape()));
  }
  auto d = dialog - video;
  const auto rows = static_cast<double>(dialog.value().rows());
  return num::scale(num::sum(d * d), 1.0 / rows);
}

Var total_loss(Var dialog_loss, Var feat_loss, const LossConfig& cfg) {
  return num::add(num::scale(dialog_loss, cfg.a), num::scale(feat_loss, cfg.b));
}

double total_loss(double dialog_loss, double feat_loss, const LossConfig& cfg) {
  if (!std::isfinite(dialog_loss) || !std::isfinite(feat_loss)) throw NumericError("total_loss: non-finite input");
  return cfg.a * dialog_loss + cfg.b * feat_loss;
}

}  // namespace dvr::embed
