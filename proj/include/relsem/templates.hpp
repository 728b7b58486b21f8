#pragma once

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relsem {

enum class TemplateFamily {
  PeopleSentence,
  JobSentence,
  PeopleQuestionReverse,
  PeopleQuestionForward,
  JobQuestionReverse,
  JobQuestionForward,
  IclCompletionReverse,  // stated fact, then the implied fact up to its object slot
  IclCompletionForward,  // stated fact, then a restatement conditioned on its head
};

std::string_view to_string(TemplateFamily family);

struct Template {
  TemplateFamily family;
  int index;  // 1-based within the family
  std::string text;
};

using Slots = std::map<std::string, std::string, std::less<>>;

/// Slot names a template may reference.
inline constexpr std::array<std::string_view, 7> kSlotNames = {
    "person_a", "person_b", "person", "relationship", "reverse_relationship", "job", "article"};

/// "an" for vowel-initial words, "a" otherwise.
std::string article_for(std::string_view word);

/// Names of the {slots} referenced by a template's text, in order of appearance.
std::vector<std::string> slot_names(std::string_view text);

class TemplateBank {
 public:
  static const TemplateBank& standard();

  std::span<const Template> family(TemplateFamily family) const;
  const Template& get(TemplateFamily family, int index) const;
  int size(TemplateFamily family) const { return static_cast<int>(this->family(family).size()); }

  /// People-sentence format of the stated clause in ICL completion template `index`.
  int icl_stated_format(int index) const;

  /// Fills every slot; throws TemplateMismatch if a referenced slot is missing.
  static std::string render(const Template& tmpl, const Slots& slots);

 private:
  TemplateBank();
  std::map<TemplateFamily, std::vector<Template>> families_;
};

}  // namespace relsem
