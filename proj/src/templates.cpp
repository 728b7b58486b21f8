#include "relsem/templates.hpp"

#include <algorithm>
#include <cctype>

#include "relsem/error.hpp"

namespace relsem {

std::string_view to_string(TemplateFamily family) {
  switch (family) {
    case TemplateFamily::PeopleSentence: return "people_sentence";
    case TemplateFamily::JobSentence: return "job_sentence";
    case TemplateFamily::PeopleQuestionReverse: return "people_question_reverse";
    case TemplateFamily::PeopleQuestionForward: return "people_question_forward";
    case TemplateFamily::JobQuestionReverse: return "job_question_reverse";
    case TemplateFamily::JobQuestionForward: return "job_question_forward";
    case TemplateFamily::IclCompletionReverse: return "icl_completion_reverse";
    case TemplateFamily::IclCompletionForward: return "icl_completion_forward";
  }
  return "?";
}

std::string article_for(std::string_view word) {
  if (word.empty()) return "a";
  switch (std::tolower(static_cast<unsigned char>(word.front()))) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return "an";
    default: return "a";
  }
}

std::vector<std::string> slot_names(std::string_view text) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    const auto end = text.find('}', pos);
    if (end == std::string_view::npos) break;
    names.emplace_back(text.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return names;
}

TemplateBank::TemplateBank() {
  auto add = [this](TemplateFamily f, std::initializer_list<const char*> texts) {
    int i = 1;
    for (const char* t : texts) families_[f].push_back({f, i++, t});
  };
  add(TemplateFamily::PeopleSentence,
      {"{person_a} is the {relationship} of {person_b}.",
       "{person_a} serves as {person_b}'s {relationship}.",
       "{person_a} acts in the role of {relationship} to {person_b}.",
       "{person_a} holds the relation of {relationship} to {person_b}."});
  add(TemplateFamily::JobSentence,
      {"{job} is the job of {person}.",
       "{person} works as {article} {job}.",
       "{person}'s occupation is {job}.",
       "{person} is employed as {article} {job}."});
  add(TemplateFamily::PeopleQuestionReverse,
      {"Who is the {relationship} of {person}?",
       "Who serves as {person}'s {relationship}?",
       "Who acts in the role of {relationship} to {person}?",
       "Who holds the relation of {relationship} to {person}?"});
  add(TemplateFamily::PeopleQuestionForward,
      {"{person} is the {relationship} of who?",
       "{person} serves as whose {relationship}?",
       "{person} acts in the role of {relationship} to who?",
       "{person} holds the relation of {relationship} to who?"});
  add(TemplateFamily::JobQuestionReverse,
      {"What is the job of {person}?",
       "What does {person} work as?",
       "What is {person}'s occupation?",
       "What is {person} employed as?"});
  add(TemplateFamily::JobQuestionForward,
      {"{person}'s job is what?",
       "{person} works as what?",
       "{person}'s occupation is what?",
       "{person} is employed as what?"});
  add(TemplateFamily::IclCompletionReverse,
      {"{person_a} serves as {person_b}'s {relationship}. {person_b} acts in the role of "
       "{reverse_relationship} to",
       "{person_a} holds the relation of {relationship} to {person_b}. {person_b} is the "
       "{reverse_relationship} of",
       "{person_a} acts in the role of {relationship} to {person_b}. {person_b} holds the "
       "relation of {reverse_relationship} to"});
  add(TemplateFamily::IclCompletionForward,
      {"{person_a} serves as {person_b}'s {relationship}. {person_a} acts in the role of "
       "{relationship} to",
       "{person_a} holds the relation of {relationship} to {person_b}. {person_a} is the "
       "{relationship} of",
       "{person_a} acts in the role of {relationship} to {person_b}. {person_a} holds the "
       "relation of {relationship} to"});

  for (const auto& [family, templates] : families_) {
    for (const auto& t : templates) {
      for (const auto& name : slot_names(t.text)) {
        if (std::ranges::find(kSlotNames, name) == kSlotNames.end())
          throw TemplateMismatch("template " + t.text + " uses undeclared slot " + name);
      }
    }
  }
}

const TemplateBank& TemplateBank::standard() {
  static const TemplateBank bank;
  return bank;
}

std::span<const Template> TemplateBank::family(TemplateFamily family) const {
  return families_.at(family);
}

const Template& TemplateBank::get(TemplateFamily family, int index) const {
  const auto& list = families_.at(family);
  if (index < 1 || index > static_cast<int>(list.size()))
    throw TemplateMismatch(std::string(to_string(family)) + " has no template " + std::to_string(index));
  return list[static_cast<std::size_t>(index - 1)];
}

int TemplateBank::icl_stated_format(int index) const {
  // Stated clause of each completion template, as a people-sentence format.
  static constexpr std::array<int, 3> kStated = {2, 4, 3};
  if (index < 1 || index > 3) throw TemplateMismatch("ICL completion index out of range");
  return kStated[static_cast<std::size_t>(index - 1)];
}

std::string TemplateBank::render(const Template& tmpl, const Slots& slots) {
  std::string out;
  out.reserve(tmpl.text.size() + 32);
  std::string_view text = tmpl.text;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const auto close = text.find('}', open);
    const auto name = text.substr(open + 1, close - open - 1);
    const auto it = slots.find(name);
    if (it == slots.end())
      throw TemplateMismatch("slot {" + std::string(name) + "} unfilled in " + tmpl.text);
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

}  // namespace relsem
