#include "corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "common/error.hpp"
#include "text/vocab.hpp"

namespace dvr::corpus {

using nlohmann::json;

void CorpusConfig::validate() const {
  // Each attribute value needs at least one coordinate of its own.
  if (motion_dim < 23) throw InvalidArgument("corpus config: motion_dim must be >= 23");
  if (appearance_dim < 33) throw InvalidArgument("corpus config: appearance_dim must be >= 33");
  if (audio_dim < 4) throw InvalidArgument("corpus config: audio_dim must be >= 4");
  if (frames < 3) throw InvalidArgument("corpus config: frames must be >= 3");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("corpus config: noise_sigma must be >= 0");
  if (rounds > question_templates().size()) throw InvalidArgument("corpus config: rounds exceeds question templates");
}

void to_json(json& j, const CorpusConfig& c) {
  j = json{{"motion_dim", c.motion_dim},   {"appearance_dim", c.appearance_dim}, {"audio_dim", c.audio_dim},
           {"noise_sigma", c.noise_sigma}, {"train_size", c.train_size},         {"val_size", c.val_size},
           {"test_size", c.test_size},     {"frames", c.frames},                 {"rounds", c.rounds},
           {"max_siblings", c.max_siblings}, {"seed", c.seed}};
}

void from_json(const json& j, CorpusConfig& c) {
  const CorpusConfig d;
  c.motion_dim = j.value("motion_dim", d.motion_dim);
  c.appearance_dim = j.value("appearance_dim", d.appearance_dim);
  c.audio_dim = j.value("audio_dim", d.audio_dim);
  c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  c.train_size = j.value("train_size", d.train_size);
  c.val_size = j.value("val_size", d.val_size);
  c.test_size = j.value("test_size", d.test_size);
  c.frames = j.value("frames", d.frames);
  c.rounds = j.value("rounds", d.rounds);
  c.max_siblings = j.value("max_siblings", d.max_siblings);
  c.seed = j.value("seed", d.seed);
}

void to_json(json& j, const SceneSpec& s) {
  j = json{{"actor_count", s.actor_count}, {"action", s.action},           {"posture", s.posture},
           {"location", s.location},       {"prop", s.prop},               {"pre_action", s.pre_action},
           {"post_action", s.post_action}, {"audio_event", s.audio_event}};
}

void from_json(const json& j, SceneSpec& s) {
  s.actor_count = j.at("actor_count").get<int>();
  s.action = j.at("action").get<std::string>();
  s.posture = j.at("posture").get<std::string>();
  s.location = j.at("location").get<std::string>();
  s.prop = j.at("prop").get<std::string>();
  s.pre_action = j.at("pre_action").get<std::string>();
  s.post_action = j.at("post_action").get<std::string>();
  s.audio_event = j.at("audio_event").get<std::string>();
}

std::vector<double> PooledFeatures::concat() const {
  std::vector<double> out;
  out.reserve(motion.size() + appearance.size() + audio.size());
  out.insert(out.end(), motion.begin(), motion.end());
  out.insert(out.end(), appearance.begin(), appearance.end());
  out.insert(out.end(), audio.begin(), audio.end());
  return out;
}

SignatureBank::SignatureBank(const CorpusConfig& cfg, std::uint64_t seed) : feature_dim_(cfg.feature_dim()) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::map<Block, std::pair<std::size_t, std::size_t>> extent = {
      {Block::motion, {0, cfg.motion_dim}},
      {Block::appearance, {cfg.motion_dim, cfg.appearance_dim}},
      {Block::audio, {cfg.motion_dim + cfg.appearance_dim, cfg.audio_dim}}};
  for (auto block : {Block::motion, Block::appearance, Block::audio}) {
    std::vector<std::pair<Attribute, std::string>> owners;
    for (auto a : kAllAttributes) {
      if (block_of(a) != block) continue;
      for (const auto& v : grammar::values(a)) owners.emplace_back(a, v);
    }
    const auto [offset, dim] = extent.at(block);
    std::vector<std::size_t> coords(dim);
    std::iota(coords.begin(), coords.end(), offset);
    std::shuffle(coords.begin(), coords.end(), rng);
    const std::size_t width = dim / owners.size();
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    for (std::size_t o = 0; o < owners.size(); ++o) {
      std::vector<double> sig(feature_dim_, 0.0);
      double norm = 0.0;
      for (std::size_t w = 0; w < width; ++w) {
        const double v = mag(rng);
        sig[coords[o * width + w]] = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : sig) v /= norm;
      table_.push_back({owners[o], std::move(sig)});
    }
  }
}

Block SignatureBank::block_of(Attribute a) const {
  switch (a) {
    case Attribute::action:
    case Attribute::posture:
    case Attribute::pre_action:
    case Attribute::post_action: return Block::motion;
    case Attribute::actor_count:
    case Attribute::location:
    case Attribute::prop: return Block::appearance;
    case Attribute::audio_event: return Block::audio;
  }
  return Block::motion;
}

const std::vector<double>& SignatureBank::signature(Attribute a, const std::string& value) const {
  for (const auto& [key, sig] : table_) {
    if (key.first == a && key.second == value) return sig;
  }
  throw InvalidArgument("no signature for " + std::string(attribute_name(a)) + "='" + value + "'");
}

SynthesizedFeatures synth_features(const SceneSpec& scene, const CorpusConfig& cfg, const SignatureBank& bank,
                                   std::mt19937_64& rng) {
  if (!is_valid(scene)) throw InvalidArgument("synth_features: scene violates the grammar");
  const auto dim = cfg.feature_dim();
  const auto third = std::max<std::size_t>(1, cfg.frames / 3);
  std::vector<double> base(dim, 0.0);
  for (auto a : kAllAttributes) {
    if (a == Attribute::pre_action || a == Attribute::post_action) continue;
    const auto& sig = bank.signature(a, scene.value(a));
    for (std::size_t i = 0; i < dim; ++i) base[i] += sig[i];
  }
  const auto& pre = bank.signature(Attribute::pre_action, scene.pre_action);
  const auto& post = bank.signature(Attribute::post_action, scene.post_action);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);

  SynthesizedFeatures out;
  std::vector<double> pooled(dim, -INFINITY);
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    std::vector<double> frame = base;
    if (f < third) {
      for (std::size_t i = 0; i < dim; ++i) frame[i] += pre[i];
    }
    if (f >= cfg.frames - third) {
      for (std::size_t i = 0; i < dim; ++i) frame[i] += post[i];
    }
    if (cfg.noise_sigma > 0.0) {
      for (auto& v : frame) v += noise(rng);
    }
    for (std::size_t i = 0; i < dim; ++i) pooled[i] = std::max(pooled[i], frame[i]);
    out.frames.push_back(num::Tensor::row(std::move(frame)));
  }
  const auto m = cfg.motion_dim, a = cfg.appearance_dim;
  out.pooled.motion.assign(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(m));
  out.pooled.appearance.assign(pooled.begin() + static_cast<std::ptrdiff_t>(m),
                               pooled.begin() + static_cast<std::ptrdiff_t>(m + a));
  out.pooled.audio.assign(pooled.begin() + static_cast<std::ptrdiff_t>(m + a), pooled.end());
  return out;
}

const std::vector<VideoRecord>& Corpus::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw InvalidArgument("unknown split '" + std::string(name) + "'");
}

namespace {

std::string scene_key(const SceneSpec& s) { return json(s).dump(); }

std::vector<SceneSpec> draw_split_scenes(std::size_t count, std::size_t max_siblings, std::set<std::string>& seen,
                                         std::mt19937_64& rng) {
  std::vector<SceneSpec> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 100 * (count + 10)) throw InvalidArgument("build_corpus: cannot draw enough distinct scenes");
    auto base = sample_scene(rng);
    if (!seen.insert(scene_key(base)).second) continue;
    out.push_back(base);
    const auto siblings = std::uniform_int_distribution<std::size_t>(0, max_siblings)(rng);
    for (std::size_t s = 0; s < siblings && out.size() < count; ++s) {
      const auto changes = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
      auto sib = perturb_scene(base, changes, rng, true);
      if (seen.insert(scene_key(sib)).second) out.push_back(sib);
    }
  }
  return out;
}

}  // namespace

Corpus build_corpus(const CorpusConfig& cfg, bool keep_frames) {
  cfg.validate();
  Corpus corpus;
  corpus.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  const SignatureBank bank(cfg, cfg.seed ^ 0x5eed5eedULL);
  std::set<std::string> seen;
  std::size_t next_id = 0;
  auto fill = [&](std::vector<VideoRecord>& dst, std::size_t count) {
    for (const auto& scene : draw_split_scenes(count, cfg.max_siblings, seen, rng)) {
      VideoRecord r;
      char id[16];
      std::snprintf(id, sizeof(id), "v%05zu", next_id++);
      r.id = id;
      r.scene = scene;
      auto feats = synth_features(scene, cfg, bank, rng);
      if (keep_frames) r.frames = std::move(feats.frames);
      r.pooled = std::move(feats.pooled);
      r.caption = caption_text(scene);
      r.dialog = gen_dialog(scene, cfg.rounds, rng);
      dst.push_back(std::move(r));
    }
  };
  fill(corpus.train, cfg.train_size);
  fill(corpus.val, cfg.val_size);
  fill(corpus.test, cfg.test_size);
  return corpus;
}

json record_to_json(const VideoRecord& r) {
  json dialog = json::array();
  for (const auto& qa : r.dialog) dialog.push_back({{"q", qa.question}, {"a", qa.answer}});
  return json{{"id", r.id},
              {"scene", r.scene},
              {"caption", r.caption},
              {"dialog", dialog},
              {"features", {{"motion", r.pooled.motion}, {"appearance", r.pooled.appearance}, {"audio", r.pooled.audio}}}};
}

VideoRecord record_from_json(const json& j) {
  VideoRecord r;
  r.id = j.at("id").get<std::string>();
  r.scene = j.at("scene").get<SceneSpec>();
  r.caption = j.at("caption").get<std::string>();
  for (const auto& qa : j.at("dialog")) r.dialog.push_back({qa.at("q").get<std::string>(), qa.at("a").get<std::string>()});
  const auto& f = j.at("features");
  r.pooled.motion = f.at("motion").get<std::vector<double>>();
  r.pooled.appearance = f.at("appearance").get<std::vector<double>>();
  r.pooled.audio = f.at("audio").get<std::vector<double>>();
  return r;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create corpus directory '" + dir.string() + "': " + ec.message());
  {
    std::ofstream out(dir / "dataset.jsonl", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / "dataset.jsonl").string() + "'");
    for (const auto* split : {&corpus.train, &corpus.val, &corpus.test}) {
      for (const auto& r : *split) out << record_to_json(r).dump() << '\n';
    }
    if (!out) throw IoError("write failed for dataset.jsonl");
  }
  json manifest;
  manifest["format"] = "dvr-corpus/1";
  manifest["config"] = corpus.config;
  for (const auto& [name, split] : {std::pair{"train", &corpus.train}, {"val", &corpus.val}, {"test", &corpus.test}}) {
    json ids = json::array();
    for (const auto& r : *split) ids.push_back(r.id);
    manifest["splits"][name] = ids;
  }
  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest.json");
    out << manifest.dump(1) << '\n';
  }
  std::vector<std::vector<std::string>> texts;
  for (const auto& r : corpus.train) {
    texts.push_back(text::tokenize(r.caption));
    for (const auto& qa : r.dialog) {
      texts.push_back(text::tokenize(qa.question));
      texts.push_back(text::tokenize(qa.answer));
    }
  }
  text::Vocabulary::build(texts).save(dir / "vocab.json");
}

Corpus read_corpus(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw IoError("cannot read '" + (dir / "manifest.json").string() + "'");
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest.json: ") + e.what());
  }
  std::ifstream df(dir / "dataset.jsonl");
  if (!df) throw IoError("cannot read '" + (dir / "dataset.jsonl").string() + "'");
  std::map<std::string, VideoRecord> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(df, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto r = record_from_json(json::parse(line));
      by_id.emplace(r.id, std::move(r));
    } catch (const json::exception& e) {
      throw IoError("dataset.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  Corpus corpus;
  corpus.config = manifest.at("config").get<CorpusConfig>();
  for (const auto& [name, dst] : {std::pair{"train", &corpus.train}, {"val", &corpus.val}, {"test", &corpus.test}}) {
    for (const auto& id : manifest.at("splits").at(name)) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) throw IoError("manifest lists unknown record '" + id.get<std::string>() + "'");
      dst->push_back(it->second);
    }
  }
  return corpus;
}

}  // namespace dvr::corpus
