#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "corpus/corpus.hpp"
#include "embedding/joint_embedding.hpp"
#include "model/history_encoder.hpp"
#include "model/question_decoder.hpp"
#include "numerics/adam.hpp"
#include "retrieval/retrieval.hpp"
#include "text/vocab.hpp"

namespace dvr::train {

struct ModelDims {
  std::size_t word_dim = 32;
  std::size_t hidden_dim = 96;
  std::size_t decoder_dim = 96;
  std::size_t joint_dim = 96;

  // 300-d words, 512-d encoders, 1024-d decoder and joint space.
  static ModelDims full() { return {300, 512, 1024, 1024}; }
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelDims& d);
void from_json(const nlohmann::json& j, ModelDims& d);

struct ModelConfig {
  model::Variant variant = model::Variant::proposed;
  ModelDims dims;
  std::size_t feature_dim = 0;
  std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Parameter groups.
inline constexpr const char* kGroupEmbedding = "embedding";
inline constexpr const char* kGroupHistory = "history_encoder";
inline constexpr const char* kGroupDecoder = "question_decoder";
inline constexpr const char* kGroupDialogEmbed = "dialog_embed";
inline constexpr const char* kGroupVideoEmbed = "video_embed";

// Word embeddings, history encoder, question decoder and the two affine maps
// into the joint space.
class RetrievalModel {
 public:
  RetrievalModel(const ModelConfig& cfg, text::Vocabulary vocab);
  RetrievalModel(const RetrievalModel&) = delete;
  RetrievalModel& operator=(const RetrievalModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const text::Vocabulary& vocab() const { return vocab_; }
  num::ParameterStore& params() { return params_; }
  const num::ParameterStore& params() const { return params_; }
  num::Var embedding(num::Tape& tape) const { return tape.leaf(*embedding_); }

  const model::HistoryEncoder& encoder() const { return encoder_; }
  const model::QuestionDecoder& decoder() const { return decoder_; }
  const embed::AffineEmbedding& dialog_embed() const { return dialog_embed_; }
  const embed::AffineEmbedding& video_embed() const { return video_embed_; }

  // Caption and the first `rounds` GT rounds, vocabulary-encoded.
  model::DialogState dialog_state(const corpus::VideoRecord& r, std::size_t rounds) const;
  model::DialogRound encode_round(const std::string& question, const std::string& answer) const;

  // Pooled features, one row per record.
  num::Tensor video_features(std::span<const corpus::VideoRecord> records) const;
  num::Tensor embed_videos(std::span<const corpus::VideoRecord> records) const;
  retrieval::VideoIndex build_index(std::span<const corpus::VideoRecord> records) const;

  // Inference helpers on plain tensors.
  num::Tensor embed_history(const num::Tensor& history) const;
  std::string generate_question(const num::Tensor& history, std::size_t max_len = 20) const;

  // Copies of every parameter value, in registration order.
  std::vector<num::Tensor> snapshot() const;
  void restore(const std::vector<num::Tensor>& values);

 private:
  ModelConfig cfg_;
  text::Vocabulary vocab_;
  num::ParameterStore params_;
  num::Parameter* embedding_ = nullptr;
  model::HistoryEncoder encoder_;
  model::QuestionDecoder decoder_;
  embed::AffineEmbedding dialog_embed_;
  embed::AffineEmbedding video_embed_;
};

// Marks every parameter of the listed groups as (not) trainable.
void set_trainable(num::ParameterStore& params, std::span<const std::string> groups, bool trainable);

// Parameter container holding the model, optionally the Adam moments, and
// caller metadata under meta["extra"].
void save_checkpoint(const std::filesystem::path& path, const RetrievalModel& model, const num::AdamState* adam,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  std::unique_ptr<RetrievalModel> model;
  num::AdamState adam;
  nlohmann::json extra;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Per-round retrieval over the full index built from `records`: for every
// record with at least `rounds` GT rounds, the GT rank after each prefix
// t = 0..rounds. Records with fewer rounds are skipped and listed.
retrieval::EvalReport evaluate_rounds(const RetrievalModel& model, std::span<const corpus::VideoRecord> records,
                                      std::size_t rounds, std::size_t batch_size = 50);

}  // namespace dvr::train
