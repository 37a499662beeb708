#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "corpus/corpus.hpp"
#include "oracles.hpp"

using namespace dvr;
using namespace dvr::corpus;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CorpusConfig small_config() {
  CorpusConfig c;
  c.train_size = 60;
  c.val_size = 20;
  c.test_size = 20;
  return c;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dvr_test_corpus_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("sample_scene covers every value and respects constraints") {
  std::mt19937_64 rng(1);
  std::map<Attribute, std::set<std::string>> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_scene(rng);
    REQUIRE(is_valid(s));
    if (s.action == "sleeping") CHECK(s.posture == "lying");
    if (s.action == "walking") CHECK(s.posture == "standing");
    CHECK(s.pre_action != s.post_action);
    for (auto a : kAllAttributes) seen[a].insert(s.value(a));
  }
  for (auto a : kAllAttributes) {
    CAPTURE(attribute_name(a));
    const auto all = grammar::values(a);
    CHECK(seen[a] == std::set<std::string>(all.begin(), all.end()));
  }
}

TEST_CASE("seeded draws are reproducible") {
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 20; ++i) CHECK(sample_scene(a) == sample_scene(b));
}

TEST_CASE("caption examples and round trip") {
  SceneSpec s;
  s.actor_count = 1;
  s.action = "reading";
  s.prop = "book";
  s.location = "living room";
  CHECK(caption_text(s) == "a man reading a book in the living room");
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const auto sc = sample_scene(rng);
    const auto parsed = parse_caption(caption_text(sc));
    REQUIRE(parsed.has_value());
    CHECK(parsed->actor_count == sc.actor_count);
    CHECK(parsed->action == sc.action);
    CHECK(parsed->prop == sc.prop);
    CHECK(parsed->location == sc.location);
  }
  CHECK_FALSE(parse_caption("a dog barking").has_value());
}

TEST_CASE("dialogs are truthful and cover distinct attributes") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto sc = sample_scene(rng);
    const std::size_t T = 1 + static_cast<std::size_t>(i % 10);
    const auto dialog = gen_dialog(sc, T, rng);
    REQUIRE(dialog.size() == T);
    std::set<std::size_t> templates;
    std::set<Attribute> attrs;
    for (const auto& qa : dialog) {
      const auto pq = parse_question(qa.question);
      REQUIRE(pq.has_value());
      templates.insert(pq->template_index);
      const auto attr = question_templates()[pq->template_index].attribute;
      attrs.insert(attr);
      if (pq->action) CHECK(*pq->action == sc.action);
      CHECK(qa.answer == answer_text(pq->template_index, sc));
      if (const auto v = parse_answer(pq->template_index, qa.answer)) CHECK(*v == sc.value(attr));
    }
    CHECK(templates.size() == T);
    CHECK(attrs.size() >= std::min<std::size_t>(T, kPrimaryTemplates));
  }
  SceneSpec lying = sample_scene(rng);
  lying.action = "sleeping";
  lying.posture = "lying";
  CHECK(answer_text(2, lying).find("lying down") != std::string::npos);
  CHECK_THROWS_AS(gen_dialog(lying, question_templates().size() + 1, rng), InvalidArgument);
}

TEST_CASE("perturbed siblings stay valid and keep the caption") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const auto base = sample_scene(rng);
    const auto sib = perturb_scene(base, 1 + static_cast<std::size_t>(i % 3), rng, true);
    CHECK(is_valid(sib));
    CHECK_FALSE(sib == base);
    CHECK(caption_text(sib) == caption_text(base));
    CHECK(sib.action == base.action);
  }
}

TEST_CASE("noiseless features: cosine grows strictly with shared attributes") {
  CorpusConfig cfg;
  cfg.noise_sigma = 0.0;
  SignatureBank bank(cfg, 11);
  std::mt19937_64 rng(6);
  std::map<std::size_t, std::pair<double, double>> range;  // shared -> (min, max) cosine
  for (int i = 0; i < 2000; ++i) {
    const auto a = sample_scene(rng);
    const auto b = i % 2 ? perturb_scene(a, 1 + static_cast<std::size_t>(i % 4), rng) : sample_scene(rng);
    const auto fa = synth_features(a, cfg, bank, rng).pooled.concat();
    const auto fb = synth_features(b, cfg, bank, rng).pooled.concat();
    const double c = oracle::cosine(fa, fb);
    const auto k = shared_attributes(a, b);
    auto it = range.find(k);
    if (it == range.end()) range[k] = {c, c};
    else it->second = {std::min(it->second.first, c), std::max(it->second.second, c)};
  }
  REQUIRE(range.size() >= 4);
  for (auto it = range.begin(); std::next(it) != range.end(); ++it) {
    CAPTURE(it->first);
    CHECK(it->second.second < std::next(it)->second.first);
  }
}

TEST_CASE("identical scenes give identical noiseless features and pooling is a per-coordinate max") {
  CorpusConfig cfg;
  cfg.noise_sigma = 0.0;
  SignatureBank bank(cfg, 11);
  std::mt19937_64 rng(7);
  const auto s = sample_scene(rng);
  CHECK(synth_features(s, cfg, bank, rng).pooled.concat() == synth_features(s, cfg, bank, rng).pooled.concat());
  cfg.noise_sigma = 0.3;
  const auto f = synth_features(s, cfg, bank, rng);
  REQUIRE(f.frames.size() == cfg.frames);
  const auto pooled = f.pooled.concat();
  REQUIRE(pooled.size() == cfg.feature_dim());
  CHECK(f.pooled.motion.size() == cfg.motion_dim);
  CHECK(f.pooled.appearance.size() == cfg.appearance_dim);
  CHECK(f.pooled.audio.size() == cfg.audio_dim);
  for (std::size_t j = 0; j < pooled.size(); ++j) {
    double m = -INFINITY;
    for (const auto& fr : f.frames) m = std::max(m, fr[j]);
    CHECK(pooled[j] == m);
  }
}

TEST_CASE("nearest noiseless neighbour shares the most attributes") {
  CorpusConfig cfg;
  cfg.noise_sigma = 0.0;
  const auto corpus = build_corpus(cfg);
  SignatureBank bank(cfg, cfg.seed ^ 0x5eed5eedULL);
  std::mt19937_64 rng(8);
  const auto& test = corpus.test;
  std::vector<std::vector<double>> feats;
  for (const auto& r : test) feats.push_back(synth_features(r.scene, cfg, bank, rng).pooled.concat());
  std::size_t ok = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    std::size_t most = 0;
    for (std::size_t j = 0; j < test.size(); ++j) {
      if (j == i) continue;
      if (oracle::cosine(feats[i], feats[j]) > oracle::cosine(feats[i], feats[best])) best = j;
      most = std::max(most, shared_attributes(test[i].scene, test[j].scene));
    }
    if (shared_attributes(test[i].scene, test[best].scene) == most) ++ok;
  }
  CHECK(static_cast<double>(ok) >= 0.9 * static_cast<double>(test.size()));
}

TEST_CASE("default corpus: sizes, disjoint splits, near duplicates, unique identification") {
  const CorpusConfig cfg;
  const auto corpus = build_corpus(cfg);
  CHECK(corpus.train.size() == 2000);
  CHECK(corpus.val.size() == 200);
  CHECK(corpus.test.size() == 200);
  std::set<std::string> ids;
  std::vector<SceneSpec> scenes;
  for (const auto* split : {&corpus.train, &corpus.val, &corpus.test}) {
    for (const auto& r : *split) {
      CHECK(ids.insert(r.id).second);
      scenes.push_back(r.scene);
      CHECK(r.dialog.size() == cfg.rounds);
      CHECK(r.pooled.concat().size() == cfg.feature_dim());
      CHECK(r.caption == caption_text(r.scene));
    }
  }
  // Every scene is distinct.
  for (std::size_t i = 0; i < scenes.size(); ++i)
    for (std::size_t j = i + 1; j < scenes.size(); ++j) REQUIRE_FALSE(scenes[i] == scenes[j]);

  const auto& test = corpus.test;
  std::size_t with_sibling = 0, identified = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    bool sib = false;
    for (std::size_t j = 0; j < test.size(); ++j) {
      if (j != i && test[j].scene.action == test[i].scene.action &&
          shared_attributes(test[i].scene, test[j].scene) >= 3) {
        sib = true;
      }
    }
    with_sibling += sib ? 1 : 0;

    // Attribute values stated by the caption and the answers.
    std::map<Attribute, std::string> pinned;
    const auto cap = parse_caption(test[i].caption);
    REQUIRE(cap.has_value());
    pinned[Attribute::actor_count] = cap->actor_count == 2 ? "2" : "1";
    pinned[Attribute::action] = cap->action;
    pinned[Attribute::prop] = cap->prop;
    pinned[Attribute::location] = cap->location;
    for (const auto& qa : test[i].dialog) {
      const auto pq = parse_question(qa.question);
      REQUIRE(pq.has_value());
      if (const auto v = parse_answer(pq->template_index, qa.answer)) {
        pinned[question_templates()[pq->template_index].attribute] = *v;
      }
    }
    std::size_t matches = 0;
    for (const auto& other : test) {
      bool all = true;
      for (const auto& [a, v] : pinned) all = all && other.scene.value(a) == v;
      matches += all ? 1 : 0;
    }
    identified += matches == 1 ? 1 : 0;
  }
  CHECK(static_cast<double>(with_sibling) >= 0.3 * static_cast<double>(test.size()));
  CHECK(static_cast<double>(identified) >= 0.95 * static_cast<double>(test.size()));
}

TEST_CASE("persisted corpus is byte-identical for a seed and reads back") {
  const auto cfg = small_config();
  const auto a = scratch("a"), b = scratch("b");
  write_corpus(build_corpus(cfg), a);
  write_corpus(build_corpus(cfg), b);
  for (const char* f : {"dataset.jsonl", "manifest.json", "vocab.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  auto other = cfg;
  other.seed = cfg.seed + 1;
  write_corpus(build_corpus(other), b);
  CHECK(slurp(a / "dataset.jsonl") != slurp(b / "dataset.jsonl"));

  const auto back = read_corpus(a);
  const auto orig = build_corpus(cfg);
  REQUIRE(back.train.size() == orig.train.size());
  REQUIRE(back.test.size() == orig.test.size());
  for (std::size_t i = 0; i < orig.test.size(); ++i) {
    CHECK(back.test[i].id == orig.test[i].id);
    CHECK(back.test[i].scene == orig.test[i].scene);
    CHECK(back.test[i].caption == orig.test[i].caption);
    CHECK(back.test[i].pooled.concat() == orig.test[i].pooled.concat());
    REQUIRE(back.test[i].dialog.size() == orig.test[i].dialog.size());
    CHECK(back.test[i].dialog[3].answer == orig.test[i].dialog[3].answer);
  }
  CHECK(back.config.seed == cfg.seed);
  CHECK(&back.split("val") == &back.val);
  CHECK_THROWS_AS(back.split("dev"), InvalidArgument);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("corrupt or missing corpus files are IO errors") {
  const auto dir = scratch("bad");
  CHECK_THROWS_AS(read_corpus(dir), IoError);
  write_corpus(build_corpus(small_config()), dir);
  {
    std::ofstream out(dir / "dataset.jsonl", std::ios::app);
    out << "{not json\n";
  }
  CHECK_THROWS_AS(read_corpus(dir), IoError);
  fs::remove_all(dir);
}

TEST_CASE("config validation and json round trip") {
  CorpusConfig c;
  nlohmann::json j = c;
  CHECK(j.get<CorpusConfig>().feature_dim() == c.feature_dim());
  auto bad = c;
  bad.motion_dim = 4;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.rounds = 11;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.frames = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
