#include "training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "common/error.hpp"

namespace dvr::train {

using nlohmann::json;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

const char* feat_loss_name(FeatLossKind k) { return k == FeatLossKind::ranking ? "ranking" : "l2"; }

FeatLossKind parse_feat_loss(const std::string& s) {
  if (s == "ranking") return FeatLossKind::ranking;
  if (s == "l2") return FeatLossKind::l2;
  throw InvalidArgument("unknown feat_loss '" + s + "' (expected ranking or l2)");
}

const char* sampling_name(RoundSampling r) { return r == RoundSampling::uniform ? "uniform" : "final"; }

RoundSampling parse_sampling(const std::string& s) {
  if (s == "uniform") return RoundSampling::uniform;
  if (s == "final") return RoundSampling::final_round;
  throw InvalidArgument("unknown round_sampling '" + s + "' (expected uniform or final)");
}

const std::vector<std::string> kJointGroups = {kGroupDialogEmbed, kGroupVideoEmbed};

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2 && feat_loss == FeatLossKind::ranking) {
    throw InvalidArgument("train config: batch_size must be >= 2 for the ranking loss");
  }
  if (batch_size < 1) throw InvalidArgument("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train config: learning_rate must be > 0");
  if (eval_batch == 0) throw InvalidArgument("train config: eval_batch must be positive");
  loss.validate();
  dims.validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"phase1_epochs", c.phase1_epochs},
           {"phase2_epochs", c.phase2_epochs},
           {"learning_rate", c.learning_rate},
           {"margin", c.loss.margin},
           {"a", c.loss.a},
           {"b", c.loss.b},
           {"variant", model::variant_name(c.variant)},
           {"feat_loss", feat_loss_name(c.feat_loss)},
           {"round_sampling", sampling_name(c.round_sampling)},
           {"dims", c.dims},
           {"seed", c.seed},
           {"patience", c.patience},
           {"steps_per_epoch", c.steps_per_epoch},
           {"eval_batch", c.eval_batch}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::set<std::string> known = {"batch_size", "phase1_epochs", "phase2_epochs", "learning_rate",
                                              "margin",     "a",             "b",             "variant",
                                              "feat_loss",  "round_sampling", "dims",         "seed",
                                              "patience",   "steps_per_epoch", "eval_batch"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw InvalidArgument("train config: unknown key '" + k + "'");
  }
  const TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.phase1_epochs = j.value("phase1_epochs", d.phase1_epochs);
  c.phase2_epochs = j.value("phase2_epochs", d.phase2_epochs);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.loss.margin = j.value("margin", d.loss.margin);
  c.loss.a = j.value("a", d.loss.a);
  c.loss.b = j.value("b", d.loss.b);
  c.variant = model::parse_variant(j.value("variant", std::string(model::variant_name(d.variant))));
  c.feat_loss = parse_feat_loss(j.value("feat_loss", std::string(feat_loss_name(d.feat_loss))));
  c.round_sampling = parse_sampling(j.value("round_sampling", std::string(sampling_name(d.round_sampling))));
  c.dims = j.contains("dims") ? j.at("dims").get<ModelDims>() : d.dims;
  c.seed = j.value("seed", d.seed);
  c.patience = j.value("patience", d.patience);
  c.steps_per_epoch = j.value("steps_per_epoch", d.steps_per_epoch);
  c.eval_batch = j.value("eval_batch", d.eval_batch);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  try {
    auto cfg = json::parse(in).get<TrainConfig>();
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidArgument("config '" + path.string() + "': " + e.what());
  }
}

std::vector<BatchItem> make_batch(std::size_t dataset_size, std::size_t rounds, std::size_t batch_size,
                                  RoundSampling policy, std::mt19937_64& rng) {
  if (batch_size > dataset_size) {
    throw InvalidArgument("make_batch: batch of " + std::to_string(batch_size) + " from " +
                          std::to_string(dataset_size) + " records");
  }
  if (policy == RoundSampling::uniform && rounds == 0) throw InvalidArgument("make_batch: uniform sampling needs T >= 1");
  std::vector<BatchItem> out;
  std::set<std::size_t> used;
  std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
  std::uniform_int_distribution<std::size_t> round(0, rounds == 0 ? 0 : rounds - 1);
  while (out.size() < batch_size) {
    const auto r = pick(rng);
    if (!used.insert(r).second) continue;
    out.push_back({r, policy == RoundSampling::uniform ? round(rng) : rounds});
  }
  return out;
}

EncodedSplit encode_split(const RetrievalModel& model, std::span<const corpus::VideoRecord> records) {
  EncodedSplit out;
  out.records = records;
  for (const auto& r : records) out.states.push_back(model.dialog_state(r, r.dialog.size()));
  out.features = model.video_features(records);
  return out;
}

BatchLoss batch_loss(Tape& tape, const RetrievalModel& model, const EncodedSplit& data,
                     std::span<const BatchItem> batch, const TrainConfig& cfg) {
  std::vector<model::DialogState> states;
  std::vector<std::size_t> rows;
  for (const auto& item : batch) {
    states.push_back(data.states.at(item.record).prefix(item.round));
    rows.push_back(item.record);
  }
  std::vector<const model::DialogState*> ptrs;
  for (const auto& s : states) ptrs.push_back(&s);

  auto E = model.embedding(tape);
  auto history = model.encoder().encode(tape, E, ptrs);
  auto dialog = model.dialog_embed().apply(tape, history);
  Tensor feats(num::Shape{rows.size(), data.features.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = data.features.row_span(rows[i]);
    std::copy(src.begin(), src.end(), feats.row_span(i).begin());
  }
  auto video = model.video_embed().apply(tape, tape.constant(std::move(feats)));

  BatchLoss out;
  out.feat = cfg.feat_loss == FeatLossKind::ranking ? embed::ranking_loss(dialog, video, cfg.loss).loss
                                                    : embed::l2_loss(dialog, video);
  std::vector<std::size_t> with_next;
  std::vector<std::vector<text::TokenId>> framed;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& full = data.states[batch[i].record];
    if (batch[i].round < full.rounds.size()) {
      with_next.push_back(i);
      framed.push_back(model::frame_question(full.rounds[batch[i].round].question));
    }
  }
  if (!with_next.empty()) {
    auto h = num::gather_rows(history, with_next);
    out.dialog = model.decoder().teacher_forced(tape, E, h, framed).loss;
    out.total = embed::total_loss(out.dialog, out.feat, cfg.loss);
  } else {
    out.total = num::scale(out.feat, cfg.loss.b);
  }
  return out;
}

StepLosses train_step(RetrievalModel& model, num::AdamState& adam, const EncodedSplit& data,
                      std::span<const BatchItem> batch, const TrainConfig& cfg) {
  Tape tape;
  auto loss = batch_loss(tape, model, data, batch, cfg);
  StepLosses out;
  out.feat = loss.feat.value().item();
  out.dialog = loss.dialog.valid() ? loss.dialog.value().item() : 0.0;
  out.total = loss.total.value().item();
  if (!std::isfinite(out.total)) {
    std::ostringstream msg;
    msg << "non-finite loss (dialog " << out.dialog << ", feat " << out.feat << ") on batch:";
    for (const auto& item : batch) msg << ' ' << data.records[item.record].id << "@t" << item.round;
    throw NumericError(msg.str());
  }
  model.params().zero_grad();
  tape.backward(loss.total);
  auto params = model.params().all();
  num::adam_step(adam, params);
  return out;
}

json TrainResult::summary() const {
  json ep = json::array();
  for (const auto& e : epochs) {
    ep.push_back({{"phase", e.phase},
                  {"epoch", e.epoch},
                  {"dialog_loss", e.dialog_loss},
                  {"feat_loss", e.feat_loss},
                  {"total_loss", e.total_loss},
                  {"val_mean_rank", e.val_mean_rank},
                  {"seconds", e.seconds}});
  }
  return {{"best_phase", best_phase},
          {"best_epoch", best_epoch},
          {"best_val_mean_rank", best_val_mean_rank},
          {"steps", steps.size()},
          {"epochs", ep}};
}

std::string TrainResult::log_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "step,phase,dialog_loss,feat_loss,total\n";
  for (const auto& s : steps) {
    out << s.step << ',' << s.phase << ',' << s.losses.dialog << ',' << s.losses.feat << ',' << s.losses.total << '\n';
  }
  return out.str();
}

TrainResult train_two_phase(const corpus::Corpus& corpus, const text::Vocabulary& vocab, const TrainConfig& cfg,
                            const TrainHooks& hooks) {
  cfg.validate();
  const auto T = corpus.config.rounds;
  ModelConfig mc;
  mc.variant = cfg.variant;
  mc.dims = cfg.dims;
  mc.feature_dim = corpus.config.feature_dim();
  mc.seed = cfg.seed;

  TrainResult res;
  res.model = std::make_unique<RetrievalModel>(mc, vocab);
  auto& model = *res.model;
  num::AdamState adam;
  adam.learning_rate = cfg.learning_rate;

  const auto train = encode_split(model, corpus.train);
  if (train.states.size() < cfg.batch_size) throw InvalidArgument("training split smaller than one batch");
  for (const auto& s : train.states) {
    if (s.rounds.size() < T) throw InvalidArgument("training record with fewer than T rounds");
  }
  const auto steps_per_epoch = cfg.steps_per_epoch ? cfg.steps_per_epoch : train.states.size() / cfg.batch_size;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto& val = corpus.val.empty() ? corpus.train : corpus.val;
  auto validate_model = [&] { return evaluate_rounds(model, val, T, cfg.eval_batch).per_round.at(T).mean_rank; };

  res.best_val_mean_rank = validate_model();
  auto best_values = model.snapshot();
  auto best_adam = adam;
  std::size_t step = 0;
  for (int phase = 1; phase <= 2; ++phase) {
    set_trainable(model.params(), kJointGroups, phase == 2);
    const auto epochs = phase == 1 ? cfg.phase1_epochs : cfg.phase2_epochs;
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      EpochRecord rec;
      rec.phase = phase;
      rec.epoch = epoch;
      for (std::size_t s = 0; s < steps_per_epoch; ++s) {
        const auto batch = make_batch(train.states.size(), T, cfg.batch_size, cfg.round_sampling, rng);
        const auto l = train_step(model, adam, train, batch, cfg);
        res.steps.push_back({++step, phase, l});
        rec.dialog_loss += l.dialog / static_cast<double>(steps_per_epoch);
        rec.feat_loss += l.feat / static_cast<double>(steps_per_epoch);
        rec.total_loss += l.total / static_cast<double>(steps_per_epoch);
      }
      rec.val_mean_rank = validate_model();
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.epochs.push_back(rec);
      if (rec.val_mean_rank < res.best_val_mean_rank) {
        res.best_val_mean_rank = rec.val_mean_rank;
        res.best_phase = phase;
        res.best_epoch = epoch;
        best_values = model.snapshot();
        best_adam = adam;
        since_best = 0;
      } else {
        ++since_best;
      }
      if (hooks.on_epoch) hooks.on_epoch(rec, model);
      if (since_best > cfg.patience) break;
    }
  }
  set_trainable(model.params(), kJointGroups, true);
  model.restore(best_values);
  res.adam = std::move(best_adam);
  return res;
}

void write_training_outputs(const TrainResult& result, const TrainConfig& cfg, const std::filesystem::path& dir,
                            const json& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  json meta = {{"train_config", cfg},
               {"phase", result.best_phase},
               {"epoch", result.best_epoch},
               {"val_history", result.summary().at("epochs")}};
  meta.update(extra);
  save_checkpoint(dir / "checkpoint.bin", *result.model, &result.adam, meta);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / name).string() + "'");
    out << text;
  };
  write("train_log.csv", result.log_csv());
  write("config.json", json(cfg).dump(2) + "\n");
  write("summary.json", result.summary().dump(2) + "\n");
}

std::vector<SuiteRow> run_baseline_suite(const corpus::Corpus& corpus, const text::Vocabulary& vocab,
                                         const TrainConfig& base) {
  struct Spec {
    const char* name;
    model::Variant variant;
    FeatLossKind loss;
  };
  const Spec specs[] = {{"proposed", model::Variant::proposed, FeatLossKind::ranking},
                        {"basic", model::Variant::basic, FeatLossKind::ranking},
                        {"basic+l2", model::Variant::basic, FeatLossKind::l2},
                        {"flat", model::Variant::flat, FeatLossKind::ranking}};
  std::vector<SuiteRow> rows;
  for (const auto& s : specs) {
    auto cfg = base;
    cfg.variant = s.variant;
    cfg.feat_loss = s.loss;
    auto res = train_two_phase(corpus, vocab, cfg);
    rows.push_back({s.name, cfg, evaluate_rounds(*res.model, corpus.test, corpus.config.rounds, cfg.eval_batch)});
  }
  return rows;
}

json suite_table(const std::vector<SuiteRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    const auto& m = r.report.per_round.back();
    out.push_back({{"model", r.name}, {"R@1", m.r1}, {"R@5", m.r5}, {"R@10", m.r10}, {"MeanR", m.mean_rank}});
  }
  return out;
}

std::string suite_curves_csv(const std::vector<SuiteRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "model,round,R@1,R@5,R@10,MeanR,MeanR_se\n";
  for (const auto& r : rows) {
    for (const auto& m : r.report.per_round) {
      out << r.name << ',' << m.round << ',' << m.r1 << ',' << m.r5 << ',' << m.r10 << ',' << m.mean_rank << ','
          << m.mean_rank_se << '\n';
    }
  }
  return out.str();
}

}  // namespace dvr::train
