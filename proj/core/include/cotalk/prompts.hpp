#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cotalk::gateway {

enum class TemplateId {
  merge_parallel,
  merge_sequential,
  denoise,
  extract_units,
  generate_questions,
  guide_first_person,
  guide_subsequent,
};

std::string_view to_string(TemplateId id) noexcept;
/// Throws InvalidArgument for an unknown id.
TemplateId parse_template_id(std::string_view name);
const std::vector<TemplateId>& all_template_ids();

using SlotBindings = std::map<std::string, std::string>;

struct PromptTemplate {
  TemplateId id{};
  std::string system_text;
  std::string user_text;         // contains {slot name} placeholders; empty for guidelines
  std::string assistant_prefix;  // empty for guidelines
  std::vector<std::string> user_slot_names;

  /// Substitutes every placeholder; throws InvalidArgument on a missing or
  /// unexpected binding.
  std::string render_user(const SlotBindings& slots) const;
};

const PromptTemplate& prompt_template(TemplateId id);
std::string_view prompt_version() noexcept;

namespace slots {
inline constexpr std::string_view kFirst = "first person annotation";
inline constexpr std::string_view kParallel = "parallel person annotation";
inline constexpr std::string_view kSequential = "sequential person annotation";
inline constexpr std::string_view kMergedCaption = "merged caption";
inline constexpr std::string_view kProcessedCaption = "processed caption";
inline constexpr std::string_view kCaption = "caption";
}  // namespace slots

}  // namespace cotalk::gateway
