#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "training/model.hpp"

namespace dvr::train {

enum class FeatLossKind { ranking, l2 };
// uniform: t drawn from 0..T-1 and the decoder predicts q_{t+1};
// final: t = T for every sample.
enum class RoundSampling { uniform, final_round };

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t phase1_epochs = 15;
  std::size_t phase2_epochs = 15;
  double learning_rate = 0.001;
  embed::LossConfig loss;
  model::Variant variant = model::Variant::proposed;
  FeatLossKind feat_loss = FeatLossKind::ranking;
  RoundSampling round_sampling = RoundSampling::uniform;
  ModelDims dims;
  std::uint64_t seed = 1;
  // Epochs without a validation improvement tolerated within a phase.
  std::size_t patience = 5;
  // 0 means dataset size / batch size.
  std::size_t steps_per_epoch = 0;
  std::size_t eval_batch = 50;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_train_config(const std::filesystem::path& path);

struct BatchItem {
  std::size_t record = 0;
  std::size_t round = 0;
};

// Distinct records; rounds drawn by `policy` over 0..rounds-1 (or rounds).
std::vector<BatchItem> make_batch(std::size_t dataset_size, std::size_t rounds, std::size_t batch_size,
                                  RoundSampling policy, std::mt19937_64& rng);

struct StepLosses {
  double dialog = 0.0;
  double feat = 0.0;
  double total = 0.0;
};

// Dialog states of a split, encoded once per training run.
struct EncodedSplit {
  std::span<const corpus::VideoRecord> records;
  std::vector<model::DialogState> states;  // all GT rounds
  num::Tensor features;
};
EncodedSplit encode_split(const RetrievalModel& model, std::span<const corpus::VideoRecord> records);

// Builds the total loss for a batch on `tape`.
struct BatchLoss {
  num::Var total;
  num::Var dialog;  // invalid when no sample has a next question
  num::Var feat;
};
BatchLoss batch_loss(num::Tape& tape, const RetrievalModel& model, const EncodedSplit& data,
                     std::span<const BatchItem> batch, const TrainConfig& cfg);

// One Adam step on the trainable parameters. A non-finite loss throws
// NumericError naming the batch.
StepLosses train_step(RetrievalModel& model, num::AdamState& adam, const EncodedSplit& data,
                      std::span<const BatchItem> batch, const TrainConfig& cfg);

struct EpochRecord {
  int phase = 1;
  std::size_t epoch = 0;  // 1-based within the phase
  double dialog_loss = 0.0;
  double feat_loss = 0.0;
  double total_loss = 0.0;
  double val_mean_rank = 0.0;
  double seconds = 0.0;
};

struct StepRecord {
  std::size_t step = 0;
  int phase = 1;
  StepLosses losses;
};

struct TrainHooks {
  std::function<void(const EpochRecord&, RetrievalModel&)> on_epoch;
};

struct TrainResult {
  std::unique_ptr<RetrievalModel> model;  // best validation parameters
  num::AdamState adam;
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  int best_phase = 0;
  std::size_t best_epoch = 0;  // 0: the untrained initialization
  double best_val_mean_rank = 0.0;
  nlohmann::json summary() const;
  // step,phase,dialog_loss,feat_loss,total
  std::string log_csv() const;
};

// Phase 1 trains with the joint-embedding maps frozen at initialization;
// phase 2 trains everything. The returned model carries the parameters with
// the best validation MeanR at the final round.
TrainResult train_two_phase(const corpus::Corpus& corpus, const text::Vocabulary& vocab, const TrainConfig& cfg,
                            const TrainHooks& hooks = {});

// Writes checkpoint.bin, train_log.csv, config.json and summary.json.
// `extra` is merged into the checkpoint metadata.
void write_training_outputs(const TrainResult& result, const TrainConfig& cfg, const std::filesystem::path& dir,
                            const nlohmann::json& extra = nlohmann::json::object());

struct SuiteRow {
  std::string name;
  TrainConfig config;
  retrieval::EvalReport report;
};

// Trains proposed, basic, basic+l2 and flat with the same seed and
// evaluates each on the test split.
std::vector<SuiteRow> run_baseline_suite(const corpus::Corpus& corpus, const text::Vocabulary& vocab,
                                         const TrainConfig& base);
nlohmann::json suite_table(const std::vector<SuiteRow>& rows);
// name,round,R@1,R@5,R@10,MeanR,MeanR_se
std::string suite_curves_csv(const std::vector<SuiteRow>& rows);

}  // namespace dvr::train
