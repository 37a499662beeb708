#include "training/model.hpp"

#include <algorithm>
#include <random>

#include "common/error.hpp"
#include "numerics/param_io.hpp"

namespace dvr::train {

using nlohmann::json;
using num::Tape;
using num::Tensor;
using num::Var;

void ModelDims::validate() const {
  if (word_dim == 0 || hidden_dim == 0 || decoder_dim == 0 || joint_dim == 0) {
    throw InvalidArgument("model dims must all be positive");
  }
}

void to_json(json& j, const ModelDims& d) {
  j = json{{"word_dim", d.word_dim}, {"hidden_dim", d.hidden_dim}, {"decoder_dim", d.decoder_dim},
           {"joint_dim", d.joint_dim}};
}

void from_json(const json& j, ModelDims& d) {
  const ModelDims def;
  d.word_dim = j.value("word_dim", def.word_dim);
  d.hidden_dim = j.value("hidden_dim", def.hidden_dim);
  d.decoder_dim = j.value("decoder_dim", def.decoder_dim);
  d.joint_dim = j.value("joint_dim", def.joint_dim);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"variant", model::variant_name(c.variant)},
           {"dims", c.dims},
           {"feature_dim", c.feature_dim},
           {"seed", c.seed}};
}

void from_json(const json& j, ModelConfig& c) {
  c.variant = model::parse_variant(j.at("variant").get<std::string>());
  c.dims = j.at("dims").get<ModelDims>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

RetrievalModel::RetrievalModel(const ModelConfig& cfg, text::Vocabulary vocab) : cfg_(cfg), vocab_(std::move(vocab)) {
  cfg.dims.validate();
  if (cfg.feature_dim == 0) throw InvalidArgument("model: feature_dim must be positive");
  std::mt19937_64 rng(cfg.seed);
  const auto& d = cfg.dims;
  embedding_ = &params_.add_uniform("embedding.words", kGroupEmbedding, {vocab_.size(), d.word_dim}, 0.08, rng);
  encoder_ = model::HistoryEncoder(params_, cfg.variant, d.word_dim, d.hidden_dim, rng);
  decoder_ = model::QuestionDecoder(params_, encoder_.output_dim(), d.word_dim, d.decoder_dim, vocab_.size(), rng);
  dialog_embed_ = embed::AffineEmbedding(params_, "dialog_embed", kGroupDialogEmbed, encoder_.output_dim(),
                                         d.joint_dim, rng);
  video_embed_ = embed::AffineEmbedding(params_, "video_embed", kGroupVideoEmbed, cfg.feature_dim, d.joint_dim, rng);
}

model::DialogRound RetrievalModel::encode_round(const std::string& question, const std::string& answer) const {
  return {vocab_.encode(question), vocab_.encode(answer)};
}

model::DialogState RetrievalModel::dialog_state(const corpus::VideoRecord& r, std::size_t rounds) const {
  if (rounds > r.dialog.size()) {
    throw InvalidArgument("video '" + r.id + "' has " + std::to_string(r.dialog.size()) + " rounds, " +
                          std::to_string(rounds) + " requested");
  }
  model::DialogState st;
  st.caption = vocab_.encode(r.caption);
  for (std::size_t i = 0; i < rounds; ++i) st.rounds.push_back(encode_round(r.dialog[i].question, r.dialog[i].answer));
  return st;
}

Tensor RetrievalModel::video_features(std::span<const corpus::VideoRecord> records) const {
  Tensor out(num::Shape{records.size(), cfg_.feature_dim});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto f = records[i].pooled.concat();
    if (f.size() != cfg_.feature_dim) {
      throw ShapeError("video '" + records[i].id + "' has " + std::to_string(f.size()) + " feature dims, model expects " +
                       std::to_string(cfg_.feature_dim));
    }
    std::copy(f.begin(), f.end(), out.row_span(i).begin());
  }
  return out;
}

Tensor RetrievalModel::embed_videos(std::span<const corpus::VideoRecord> records) const {
  Tape tape;
  return video_embed_.apply(tape, tape.constant(video_features(records))).value();
}

retrieval::VideoIndex RetrievalModel::build_index(std::span<const corpus::VideoRecord> records) const {
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  return retrieval::VideoIndex(std::move(ids), embed_videos(records));
}

Tensor RetrievalModel::embed_history(const Tensor& history) const {
  Tape tape;
  return dialog_embed_.apply(tape, tape.constant(history)).value();
}

std::string RetrievalModel::generate_question(const Tensor& history, std::size_t max_len) const {
  Tape tape;
  return vocab_.decode(decoder_.greedy(tape, embedding(tape), history, max_len));
}

std::vector<Tensor> RetrievalModel::snapshot() const {
  std::vector<Tensor> out;
  for (const auto* p : params_.all()) out.push_back(p->value);
  return out;
}

void RetrievalModel::restore(const std::vector<Tensor>& values) {
  auto all = params_.all();
  if (values.size() != all.size()) throw InvalidArgument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (values[i].shape() != all[i]->value.shape()) throw ShapeError("restore: shape mismatch for " + all[i]->name);
    all[i]->value = values[i];
  }
}

void set_trainable(num::ParameterStore& params, std::span<const std::string> groups, bool trainable) {
  for (const auto& g : groups) {
    for (auto* p : params.group(g)) p->requires_grad = trainable;
  }
}

void save_checkpoint(const std::filesystem::path& path, const RetrievalModel& model, const num::AdamState* adam,
                     const json& extra) {
  num::ParamFile file;
  file.meta["kind"] = "dvr-checkpoint";
  file.meta["model"] = model.config();
  file.meta["vocab"] = model.vocab().tokens();
  file.meta["extra"] = extra;
  for (const auto* p : model.params().all()) file.arrays.push_back({"param/" + p->name, p->value});
  if (adam) {
    file.meta["adam"] = {{"learning_rate", adam->learning_rate},
                         {"beta1", adam->beta1},
                         {"beta2", adam->beta2},
                         {"epsilon", adam->epsilon},
                         {"step", adam->step}};
    for (const auto& [name, mom] : adam->moments) {
      file.arrays.push_back({"adam.m/" + name, mom.m});
      file.arrays.push_back({"adam.v/" + name, mom.v});
    }
  }
  num::save_param_file(path, file);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto file = num::load_param_file(path);
  if (file.meta.value("kind", "") != "dvr-checkpoint") throw IoError("'" + path.string() + "' is not a checkpoint");
  LoadedCheckpoint out;
  try {
    auto cfg = file.meta.at("model").get<ModelConfig>();
    auto vocab = text::Vocabulary::from_tokens(file.meta.at("vocab").get<std::vector<std::string>>());
    out.model = std::make_unique<RetrievalModel>(cfg, std::move(vocab));
    out.extra = file.meta.value("extra", json::object());
    if (file.meta.contains("adam")) {
      const auto& a = file.meta.at("adam");
      out.adam.learning_rate = a.at("learning_rate").get<double>();
      out.adam.beta1 = a.at("beta1").get<double>();
      out.adam.beta2 = a.at("beta2").get<double>();
      out.adam.epsilon = a.at("epsilon").get<double>();
      out.adam.step = a.at("step").get<long>();
    }
  } catch (const json::exception& e) {
    throw IoError("checkpoint metadata: " + std::string(e.what()));
  }
  for (auto* p : out.model->params().all()) {
    const auto* t = file.find("param/" + p->name);
    if (!t) throw IoError("checkpoint lacks parameter " + p->name);
    if (t->shape() != p->value.shape()) {
      throw IoError("checkpoint parameter " + p->name + " has shape " + num::shape_str(t->shape()) + ", expected " +
                    num::shape_str(p->value.shape()));
    }
    p->value = *t;
    const auto* m = file.find("adam.m/" + p->name);
    const auto* v = file.find("adam.v/" + p->name);
    if (m && v) out.adam.moments[p->name] = {*m, *v};
  }
  return out;
}

retrieval::EvalReport evaluate_rounds(const RetrievalModel& model, std::span<const corpus::VideoRecord> records,
                                      std::size_t rounds, std::size_t batch_size) {
  if (batch_size == 0) throw InvalidArgument("evaluate: batch size must be positive");
  const auto index = model.build_index(records);
  std::vector<std::size_t> usable;
  std::vector<std::string> skipped;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].dialog.size() >= rounds) {
      usable.push_back(i);
    } else {
      skipped.push_back(records[i].id);
    }
  }
  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> traj;
  for (std::size_t begin = 0; begin < usable.size(); begin += batch_size) {
    const auto end = std::min(usable.size(), begin + batch_size);
    std::vector<model::DialogState> states;
    for (auto k = begin; k < end; ++k) states.push_back(model.dialog_state(records[usable[k]], rounds));
    std::vector<const model::DialogState*> ptrs;
    for (const auto& s : states) ptrs.push_back(&s);
    Tape tape;
    const auto hist = model.encoder().encode_prefixes(tape, model.embedding(tape), ptrs);
    std::vector<std::vector<std::size_t>> batch_traj(end - begin);
    for (std::size_t t = 0; t <= rounds; ++t) {
      const auto joint = model.dialog_embed().apply(tape, hist[t]).value();
      for (std::size_t b = 0; b < end - begin; ++b) {
        batch_traj[b].push_back(retrieval::rank_of(joint.row_span(b), index, usable[begin + b]));
      }
    }
    for (std::size_t b = 0; b < end - begin; ++b) {
      ids.push_back(records[usable[begin + b]].id);
      traj.push_back(std::move(batch_traj[b]));
    }
  }
  return retrieval::summarize(rounds, index.size(), std::move(ids), std::move(traj), std::move(skipped));
}

}  // namespace dvr::train
