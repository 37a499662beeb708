#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "numerics/tape.hpp"

namespace dvr::embed {

// Single affine map into the joint space: x W + b. Used for both the video
// embedding and the dialog embedding.
class AffineEmbedding {
 public:
  AffineEmbedding() = default;
  AffineEmbedding(num::ParameterStore& store, const std::string& prefix, const std::string& group,
                  std::size_t input_dim, std::size_t joint_dim, std::mt19937_64& rng);

  // x: [n x input_dim] -> [n x joint_dim].
  num::Var apply(num::Tape& tape, num::Var x) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t joint_dim() const { return joint_dim_; }
  num::Parameter& weight() const { return *weight_; }
  num::Parameter& bias() const { return *bias_; }

 private:
  num::Parameter* weight_ = nullptr;
  num::Parameter* bias_ = nullptr;
  std::size_t input_dim_ = 0;
  std::size_t joint_dim_ = 0;
};

// Cosine similarity; a zero vector has no defined cosine and throws.
double similarity(std::span<const double> x, std::span<const double> y);

// L(r) = 1 + 1 / (n - r + 1) for 1 <= r <= n.
double rank_weight(std::size_t r, std::size_t n);

struct LossConfig {
  double margin = 0.2;
  double a = 2.0;
  double b = 1000.0;

  void validate() const;
};

// In-batch hard negatives and ranks derived from the similarity matrix
// sim[i][j] = S(video_i, dialog_j). Ties go to the lowest batch index.
struct RankingBatch {
  std::size_t size = 0;
  std::vector<std::size_t> hard_dialog;  // for video i: argmax_{j != i} sim[i][j]
  std::vector<std::size_t> hard_video;   // for dialog i: argmax_{j != i} sim[j][i]
  std::vector<std::size_t> rank_v;       // rank of dialog i in row i, 1-based
  std::vector<std::size_t> rank_s;       // rank of video i in column i, 1-based
};

RankingBatch mine_batch(const num::Tensor& sim);

struct RankingLoss {
  num::Var loss;
  num::Var sim;
  RankingBatch batch;
};

// Rank-weighted bidirectional hinge loss with in-batch hard negatives. Row i
// of `dialog` and `video` is a matched pair. Mining and ranks are constants
// of the forward pass; gradients flow through the similarities only.
RankingLoss ranking_loss(num::Var dialog, num::Var video, const LossConfig& cfg);

// Mean over pairs of the squared Euclidean distance.
num::Var l2_loss(num::Var dialog, num::Var video);

// a * dialog_loss + b * feat_loss.
num::Var total_loss(num::Var dialog_loss, num::Var feat_loss, const LossConfig& cfg);
double total_loss(double dialog_loss, double feat_loss, const LossConfig& cfg);

}  // namespace dvr::embed
