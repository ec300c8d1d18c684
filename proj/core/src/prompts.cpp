#include "cotalk/prompts.hpp"

#include <array>
#include <set>

#include "cotalk/error.hpp"

namespace cotalk::gateway {

namespace detail {
extern const char* const kPromptVersion;
const std::map<std::string, std::string>& prompt_resources();
}  // namespace detail

namespace {

constexpr std::array<std::pair<TemplateId, std::string_view>, 7> kNames{{
    {TemplateId::merge_parallel, "merge_parallel"},
    {TemplateId::merge_sequential, "merge_sequential"},
    {TemplateId::denoise, "denoise"},
    {TemplateId::extract_units, "extract_units"},
    {TemplateId::generate_questions, "generate_questions"},
    {TemplateId::guide_first_person, "guide_first_person"},
    {TemplateId::guide_subsequent, "guide_subsequent"},
}};

std::string resource(std::string_view id, std::string_view part) {
  const auto& all = detail::prompt_resources();
  auto it = all.find(std::string(id) + "." + std::string(part) + ".txt");
  if (it == all.end()) return {};
  std::string s = it->second;
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::vector<std::string> placeholders(const std::string& text) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    auto end = text.find('}', pos);
    if (end == std::string::npos) break;
    names.push_back(text.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return names;
}

std::map<TemplateId, PromptTemplate> load_all() {
  std::map<TemplateId, PromptTemplate> out;
  for (auto [id, name] : kNames) {
    PromptTemplate t;
    t.id = id;
    t.system_text = resource(name, "system");
    t.user_text = resource(name, "user");
    t.assistant_prefix = resource(name, "prefix");
    t.user_slot_names = placeholders(t.user_text);
    out.emplace(id, std::move(t));
  }
  return out;
}

}  // namespace

std::string_view to_string(TemplateId id) noexcept {
  for (auto [tid, name] : kNames) {
    if (tid == id) return name;
  }
  return "unknown";
}

TemplateId parse_template_id(std::string_view name) {
  for (auto [tid, n] : kNames) {
    if (n == name) return tid;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown template id: " + std::string(name));
}

const std::vector<TemplateId>& all_template_ids() {
  static const std::vector<TemplateId> ids = [] {
    std::vector<TemplateId> v;
    for (auto [id, name] : kNames) v.push_back(id);
    return v;
  }();
  return ids;
}

std::string PromptTemplate::render_user(const SlotBindings& slots) const {
  std::set<std::string> expected(user_slot_names.begin(), user_slot_names.end());
  for (const auto& [name, value] : slots) {
    if (!expected.count(name)) {
      throw Error(ErrorCode::InvalidArgument,
                  "template " + std::string(to_string(id)) + " has no slot '" + name + "'");
    }
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < user_text.size()) {
    auto open = user_text.find('{', pos);
    auto close = open == std::string::npos ? open : user_text.find('}', open);
    if (close == std::string::npos) {
      out.append(user_text, pos);
      break;
    }
    out.append(user_text, pos, open - pos);
    std::string name = user_text.substr(open + 1, close - open - 1);
    auto it = slots.find(name);
    if (it == slots.end()) {
      throw Error(ErrorCode::InvalidArgument, "missing slot '" + name + "'");
    }
    out += it->second;
    pos = close + 1;
  }
  return out;
}

const PromptTemplate& prompt_template(TemplateId id) {
  static const std::map<TemplateId, PromptTemplate> all = load_all();
  return all.at(id);
}

std::string_view prompt_version() noexcept { return detail::kPromptVersion; }

}  // namespace cotalk::gateway
