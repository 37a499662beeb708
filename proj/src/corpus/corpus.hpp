#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus/grammar.hpp"
#include "numerics/tensor.hpp"

namespace dvr::corpus {

enum class Block { motion, appearance, audio };

struct CorpusConfig {
  std::size_t motion_dim = 64;
  std::size_t appearance_dim = 128;
  std::size_t audio_dim = 8;
  double noise_sigma = 0.1;
  std::size_t train_size = 2000;
  std::size_t val_size = 200;
  std::size_t test_size = 200;
  std::size_t frames = 8;
  std::size_t rounds = 10;
  // Near-duplicate groups: each base scene gets up to this many siblings
  // sharing its caption.
  std::size_t max_siblings = 15;
  std::uint64_t seed = 7;

  std::size_t feature_dim() const { return motion_dim + appearance_dim + audio_dim; }
  void validate() const;
};

void to_json(nlohmann::json& j, const CorpusConfig& c);
void from_json(const nlohmann::json& j, CorpusConfig& c);
void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

struct PooledFeatures {
  std::vector<double> motion;
  std::vector<double> appearance;
  std::vector<double> audio;

  // motion | appearance | audio
  std::vector<double> concat() const;
};

struct VideoRecord {
  std::string id;
  SceneSpec scene;
  std::vector<num::Tensor> frames;  // [1 x feature_dim] per frame; empty once persisted
  PooledFeatures pooled;
  std::string caption;
  std::vector<QA> dialog;
};

// Fixed seeded signatures: every attribute value owns a disjoint set of
// coordinates inside its block, with positive weights of unit norm.
class SignatureBank {
 public:
  SignatureBank(const CorpusConfig& cfg, std::uint64_t seed);

  Block block_of(Attribute a) const;
  // Full-width [feature_dim] vector with the signature placed in its block.
  const std::vector<double>& signature(Attribute a, const std::string& value) const;

 private:
  std::size_t feature_dim_;
  std::vector<std::pair<std::pair<Attribute, std::string>, std::vector<double>>> table_;
};

struct SynthesizedFeatures {
  std::vector<num::Tensor> frames;
  PooledFeatures pooled;
};

// Per frame: sum of the active signatures (pre_action only in the early
// third of the frames, post_action only in the late third) plus N(0, sigma)
// noise; pooled = per-block max over frames.
SynthesizedFeatures synth_features(const SceneSpec& scene, const CorpusConfig& cfg, const SignatureBank& bank,
                                   std::mt19937_64& rng);

struct Corpus {
  CorpusConfig config;
  std::vector<VideoRecord> train;
  std::vector<VideoRecord> val;
  std::vector<VideoRecord> test;

  const std::vector<VideoRecord>& split(std::string_view name) const;
};

// Deterministic from cfg.seed. Scenes are drawn in near-duplicate groups
// (same caption, one to three of posture, pre/post action and audio redrawn)
// and every scene in the corpus is distinct.
Corpus build_corpus(const CorpusConfig& cfg, bool keep_frames = false);

// dataset.jsonl (one record per line), manifest.json (config and split ids),
// vocab.json (built from the training split).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

nlohmann::json record_to_json(const VideoRecord& r);
VideoRecord record_from_json(const nlohmann::json& j);

}  // namespace dvr::corpus
