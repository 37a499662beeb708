#include "corpus/grammar.hpp"

#include <algorithm>
#include <map>

#include "common/error.hpp"
#include "text/vocab.hpp"

namespace dvr::corpus {

namespace {

template <typename T>
const T& pick(const std::vector<T>& values, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
  return values[d(rng)];
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::string article(const std::string& noun) {
  return std::string("aeiou").find(noun.front()) != std::string::npos ? "an" : "a";
}

const std::map<std::string, std::pair<std::string, std::vector<std::string>>, std::less<>>& action_props() {
  // action -> (preposition before the prop, props)
  static const std::map<std::string, std::pair<std::string, std::vector<std::string>>, std::less<>> m = {
      {"reading", {"", {"book", "magazine", "newspaper"}}},
      {"drinking", {"from", {"cup", "glass", "bottle"}}},
      {"cooking", {"with", {"pan", "pot", "kettle"}}},
      {"walking", {"with", {"bag", "phone", "box"}}},
      {"sleeping", {"with", {"pillow", "blanket", "towel"}}},
      {"eating", {"", {"sandwich", "apple", "banana"}}},
      {"cleaning", {"", {"table", "window", "mirror"}}},
      {"watching", {"", {"television", "laptop", "phone"}}},
  };
  return m;
}

}  // namespace

std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::actor_count: return "actor_count";
    case Attribute::action: return "action";
    case Attribute::posture: return "posture";
    case Attribute::location: return "location";
    case Attribute::prop: return "prop";
    case Attribute::pre_action: return "pre_action";
    case Attribute::post_action: return "post_action";
    case Attribute::audio_event: return "audio_event";
  }
  return "unknown";
}

const std::string& SceneSpec::value(Attribute a) const {
  static const std::string one = "1", two = "2";
  switch (a) {
    case Attribute::actor_count: return actor_count == 2 ? two : one;
    case Attribute::action: return action;
    case Attribute::posture: return posture;
    case Attribute::location: return location;
    case Attribute::prop: return prop;
    case Attribute::pre_action: return pre_action;
    case Attribute::post_action: return post_action;
    case Attribute::audio_event: return audio_event;
  }
  return action;
}

void SceneSpec::set(Attribute a, const std::string& v) {
  switch (a) {
    case Attribute::actor_count: actor_count = v == "2" ? 2 : 1; break;
    case Attribute::action: action = v; break;
    case Attribute::posture: posture = v; break;
    case Attribute::location: location = v; break;
    case Attribute::prop: prop = v; break;
    case Attribute::pre_action: pre_action = v; break;
    case Attribute::post_action: post_action = v; break;
    case Attribute::audio_event: audio_event = v; break;
  }
}

std::size_t shared_attributes(const SceneSpec& a, const SceneSpec& b) {
  std::size_t n = 0;
  for (auto attr : kAllAttributes) n += a.value(attr) == b.value(attr) ? 1 : 0;
  return n;
}

namespace grammar {

const std::vector<std::string>& actions() {
  static const std::vector<std::string> v = {"reading", "drinking", "cooking",  "walking",
                                             "sleeping", "eating",   "cleaning", "watching"};
  return v;
}

const std::vector<std::string>& postures() {
  static const std::vector<std::string> v = {"standing", "sitting", "lying"};
  return v;
}

const std::vector<std::string>& locations() {
  static const std::vector<std::string> v = {"kitchen", "bedroom", "living room", "bathroom",
                                             "hallway", "garage",  "office",      "dining room"};
  return v;
}

const std::vector<std::string>& props(std::string_view action) {
  const auto& m = action_props();
  auto it = m.find(action);
  if (it == m.end()) throw InvalidArgument("unknown action '" + std::string(action) + "'");
  return it->second.second;
}

const std::vector<std::string>& all_props() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (const auto& a : actions()) {
      for (const auto& p : props(a)) {
        if (!contains(out, p)) out.push_back(p);
      }
    }
    return out;
  }();
  return v;
}

const std::vector<std::string>& side_actions() {
  static const std::vector<std::string> v = {"opening the door",     "turning on the light", "picking up a towel",
                                             "taking off a jacket", "looking out the window", "closing the door"};
  return v;
}

const std::vector<std::string>& audio_events() {
  static const std::vector<std::string> v = {"talking", "silence", "music", "laughter"};
  return v;
}

std::vector<std::string> values(Attribute a) {
  switch (a) {
    case Attribute::actor_count: return {"1", "2"};
    case Attribute::action: return actions();
    case Attribute::posture: return postures();
    case Attribute::location: return locations();
    case Attribute::prop: return all_props();
    case Attribute::pre_action:
    case Attribute::post_action: return side_actions();
    case Attribute::audio_event: return audio_events();
  }
  return {};
}

}  // namespace grammar

namespace {

std::vector<std::string> allowed_postures(const std::string& action) {
  if (action == "sleeping") return {"lying"};
  if (action == "walking") return {"standing"};
  return grammar::postures();
}

std::vector<std::string> allowed_values(const SceneSpec& s, Attribute a) {
  switch (a) {
    case Attribute::posture: return allowed_postures(s.action);
    case Attribute::prop: return grammar::props(s.action);
    case Attribute::pre_action:
    case Attribute::post_action: {
      auto v = grammar::side_actions();
      const auto& other = a == Attribute::pre_action ? s.post_action : s.pre_action;
      v.erase(std::remove(v.begin(), v.end(), other), v.end());
      return v;
    }
    default: return grammar::values(a);
  }
}

}  // namespace

bool is_valid(const SceneSpec& s) {
  if (s.actor_count != 1 && s.actor_count != 2) return false;
  if (!contains(grammar::actions(), s.action)) return false;
  if (!contains(allowed_postures(s.action), s.posture)) return false;
  if (!contains(grammar::locations(), s.location)) return false;
  if (!contains(grammar::props(s.action), s.prop)) return false;
  if (!contains(grammar::side_actions(), s.pre_action) || !contains(grammar::side_actions(), s.post_action)) return false;
  if (s.pre_action == s.post_action) return false;
  return contains(grammar::audio_events(), s.audio_event);
}

SceneSpec sample_scene(std::mt19937_64& rng) {
  SceneSpec s;
  s.actor_count = std::uniform_int_distribution<int>(1, 2)(rng);
  s.action = pick(grammar::actions(), rng);
  s.posture = pick(allowed_postures(s.action), rng);
  s.location = pick(grammar::locations(), rng);
  s.prop = pick(grammar::props(s.action), rng);
  s.pre_action = pick(grammar::side_actions(), rng);
  s.post_action = pick(allowed_values(s, Attribute::post_action), rng);
  s.audio_event = pick(grammar::audio_events(), rng);
  return s;
}

SceneSpec perturb_scene(const SceneSpec& base, std::size_t count, std::mt19937_64& rng, bool keep_caption) {
  std::vector<Attribute> eligible = {Attribute::pre_action, Attribute::post_action, Attribute::audio_event};
  if (!keep_caption) {
    eligible.insert(eligible.begin(), {Attribute::location, Attribute::prop});
  }
  if (allowed_postures(base.action).size() > 1) eligible.push_back(Attribute::posture);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  count = std::clamp<std::size_t>(count, 1, eligible.size());
  SceneSpec s = base;
  for (std::size_t i = 0; i < count; ++i) {
    auto candidates = allowed_values(s, eligible[i]);
    candidates.erase(std::remove(candidates.begin(), candidates.end(), s.value(eligible[i])), candidates.end());
    if (candidates.empty()) continue;
    s.set(eligible[i], pick(candidates, rng));
  }
  return s;
}

std::string prop_phrase(const SceneSpec& s) {
  const auto& entry = action_props().find(s.action)->second;
  std::string phrase = entry.first.empty() ? "" : entry.first + " ";
  return phrase + article(s.prop) + " " + s.prop;
}

std::string caption_text(const SceneSpec& s) {
  return std::string(s.actor_count == 2 ? "two people " : "a man ") + s.action + " " + prop_phrase(s) + " in the " +
         s.location;
}

std::optional<ParsedCaption> parse_caption(std::string_view caption) {
  const auto tokens = text::tokenize(caption);
  SceneSpec probe;
  for (int count : {1, 2}) {
    probe.actor_count = count;
    for (const auto& action : grammar::actions()) {
      probe.action = action;
      for (const auto& prop : grammar::props(action)) {
        probe.prop = prop;
        for (const auto& loc : grammar::locations()) {
          probe.location = loc;
          if (text::tokenize(caption_text(probe)) == tokens) return ParsedCaption{count, action, prop, loc};
        }
      }
    }
  }
  return std::nullopt;
}

const std::vector<QuestionTemplate>& question_templates() {
  static const std::vector<QuestionTemplate> t = {
      {Attribute::actor_count, "how many people are in the video ?"},
      {Attribute::action, "what is the person doing ?"},
      {Attribute::posture, "is the person standing , sitting or lying down ?"},
      {Attribute::location, "where does the video take place ?"},
      {Attribute::prop, "what object can you see ?"},
      {Attribute::pre_action, "what was the person doing before {action} ?"},
      {Attribute::post_action, "what does the person do after {action} ?"},
      {Attribute::audio_event, "can you hear any sound ?"},
      {Attribute::actor_count, "is the person alone ?"},
      {Attribute::audio_event, "is anyone talking in the video ?"},
  };
  return t;
}

namespace {

std::string fill(const std::string& pattern, const std::string& action) {
  const std::string slot = "{action}";
  auto pos = pattern.find(slot);
  if (pos == std::string::npos) return pattern;
  return pattern.substr(0, pos) + action + pattern.substr(pos + slot.size());
}

std::string posture_answer(const std::string& p) { return p == "lying" ? "lying down" : p; }

std::string audio_answer(const std::string& a) {
  if (a == "talking") return "yes , someone is talking";
  if (a == "silence") return "no , it is silent";
  if (a == "music") return "yes , there is music";
  return "yes , someone is laughing";
}

}  // namespace

std::string question_text(std::size_t template_index, const SceneSpec& s) {
  const auto& t = question_templates();
  if (template_index >= t.size()) throw InvalidArgument("unknown question template");
  return fill(t[template_index].pattern, s.action);
}

std::string answer_text(std::size_t template_index, const SceneSpec& s) {
  switch (template_index) {
    case 0: return s.actor_count == 2 ? "two people" : "one person";
    case 1: return s.action + " " + prop_phrase(s);
    case 2: return posture_answer(s.posture);
    case 3: return "in the " + s.location;
    case 4: return "i can see " + article(s.prop) + " " + s.prop;
    case 5: return s.pre_action;
    case 6: return s.post_action;
    case 7: return audio_answer(s.audio_event);
    case 8: return s.actor_count == 2 ? "no , there are two people" : "yes , only one person";
    case 9: return s.audio_event == "talking" ? "yes" : "no";
    default: throw InvalidArgument("unknown question template");
  }
}

std::optional<ParsedQuestion> parse_question(std::string_view question) {
  const auto tokens = text::tokenize(question);
  const auto& t = question_templates();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].pattern.find("{action}") == std::string::npos) {
      if (text::tokenize(t[i].pattern) == tokens) return ParsedQuestion{i, std::nullopt};
      continue;
    }
    for (const auto& a : grammar::actions()) {
      if (text::tokenize(fill(t[i].pattern, a)) == tokens) return ParsedQuestion{i, a};
    }
  }
  return std::nullopt;
}

std::optional<std::string> parse_answer(std::size_t template_index, std::string_view answer) {
  const auto tokens = text::tokenize(answer);
  const auto attr = question_templates().at(template_index).attribute;
  if (template_index == 9) {
    if (tokens == text::tokenize("yes")) return std::string("talking");
    return std::nullopt;
  }
  // Invert by pushing every candidate value through the answer template.
  SceneSpec probe;
  if (attr == Attribute::action || attr == Attribute::prop) {
    for (const auto& action : grammar::actions()) {
      probe.action = action;
      for (const auto& p : grammar::props(action)) {
        probe.prop = p;
        if (text::tokenize(answer_text(template_index, probe)) == tokens) return probe.value(attr);
      }
    }
    return std::nullopt;
  }
  for (const auto& v : grammar::values(attr)) {
    probe.set(attr, v);
    if (text::tokenize(answer_text(template_index, probe)) == tokens) return v;
  }
  return std::nullopt;
}

std::vector<QA> gen_dialog(const SceneSpec& s, std::size_t T, std::mt19937_64& rng) {
  const auto& templates = question_templates();
  if (T > templates.size()) {
    throw InvalidArgument("gen_dialog: T=" + std::to_string(T) + " exceeds the " + std::to_string(templates.size()) +
                          " question templates");
  }
  std::vector<std::size_t> primary(kPrimaryTemplates), secondary;
  for (std::size_t i = 0; i < kPrimaryTemplates; ++i) primary[i] = i;
  for (std::size_t i = kPrimaryTemplates; i < templates.size(); ++i) secondary.push_back(i);
  std::shuffle(primary.begin(), primary.end(), rng);
  std::shuffle(secondary.begin(), secondary.end(), rng);
  std::vector<std::size_t> chosen(primary.begin(), primary.begin() + static_cast<std::ptrdiff_t>(std::min(T, primary.size())));
  for (std::size_t i = 0; chosen.size() < T; ++i) chosen.push_back(secondary[i]);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  std::vector<QA> out;
  out.reserve(T);
  for (auto idx : chosen) out.push_back({question_text(idx, s), answer_text(idx, s)});
  return out;
}

}  // namespace dvr::corpus
