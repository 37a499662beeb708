#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dvr::corpus {

enum class Attribute { actor_count, action, posture, location, prop, pre_action, post_action, audio_event };
inline constexpr std::size_t kAttributeCount = 8;
inline constexpr std::array<Attribute, kAttributeCount> kAllAttributes = {
    Attribute::actor_count, Attribute::action,     Attribute::posture,     Attribute::location,
    Attribute::prop,        Attribute::pre_action, Attribute::post_action, Attribute::audio_event};

std::string_view attribute_name(Attribute a);

struct SceneSpec {
  int actor_count = 1;
  std::string action;
  std::string posture;
  std::string location;
  std::string prop;
  std::string pre_action;
  std::string post_action;
  std::string audio_event;

  const std::string& value(Attribute a) const;
  void set(Attribute a, const std::string& v);
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

std::size_t shared_attributes(const SceneSpec& a, const SceneSpec& b);

// Closed value sets of the scene grammar.
namespace grammar {
const std::vector<std::string>& actions();
const std::vector<std::string>& postures();
const std::vector<std::string>& locations();
const std::vector<std::string>& props(std::string_view action);
const std::vector<std::string>& all_props();
const std::vector<std::string>& side_actions();  // pre/post actions
const std::vector<std::string>& audio_events();
// Every value an attribute can take (actor_count as "1"/"2").
std::vector<std::string> values(Attribute a);
}  // namespace grammar

// Checks closed-set membership and the consistency constraints.
bool is_valid(const SceneSpec& s);

// Uniform draw per attribute subject to: sleeping -> lying, walking ->
// standing, prop drawn from the action's props, pre != post.
SceneSpec sample_scene(std::mt19937_64& rng);

// Redraws `count` attributes other than action and actor_count, keeping the
// scene valid and different from the input. With keep_caption, location and
// prop stay too, so the caption is unchanged.
SceneSpec perturb_scene(const SceneSpec& base, std::size_t count, std::mt19937_64& rng, bool keep_caption = false);

// "a man|two people <action> <prop phrase> in the <location>"
std::string caption_text(const SceneSpec& s);
std::string prop_phrase(const SceneSpec& s);

struct ParsedCaption {
  int actor_count;
  std::string action;
  std::string prop;
  std::string location;
};
std::optional<ParsedCaption> parse_caption(std::string_view caption);

// Question templates. Indices 0..7 are the primary template of each attribute
// in kAllAttributes order; 8 and 9 are secondary templates.
struct QuestionTemplate {
  Attribute attribute;
  std::string pattern;  // may contain "{action}"
};
const std::vector<QuestionTemplate>& question_templates();
inline constexpr std::size_t kPrimaryTemplates = 8;

std::string question_text(std::size_t template_index, const SceneSpec& s);
std::string answer_text(std::size_t template_index, const SceneSpec& s);

struct ParsedQuestion {
  std::size_t template_index;
  std::optional<std::string> action;  // slot value when the template has one
};
// Token-level match against the template grammar.
std::optional<ParsedQuestion> parse_question(std::string_view question);

// Attribute value stated by an answer to the given template, when the answer
// pins it down exactly.
std::optional<std::string> parse_answer(std::size_t template_index, std::string_view answer);

struct QA {
  std::string question;
  std::string answer;
};

// T distinct templates in seeded-random order with truthful answers. Covers
// min(T, attribute count) distinct attributes.
std::vector<QA> gen_dialog(const SceneSpec& s, std::size_t T, std::mt19937_64& rng);

}  // namespace dvr::corpus
