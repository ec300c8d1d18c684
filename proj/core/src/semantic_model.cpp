#include "cotalk/semantic_model.hpp"

#include <algorithm>
#include <utility>

#include "cotalk/dedup.hpp"
#include "cotalk/error.hpp"
#include "cotalk/text.hpp"

namespace cotalk::semantic {

namespace {

constexpr std::string_view kKindNames[kAttributeKindCount] = {
    "absolute_location", "relative_location", "colour",
    "amount",            "size",              "shape",
    "material",          "object_description", "other",
};

struct ObjectAccumulator {
  int round = 0;
  bool seen = false;
  std::map<std::pair<AttributeKind, std::string>, int> edges;
};

void keep_min(int& slot, bool& seen, int round) {
  if (!seen || round < slot) slot = round;
  seen = true;
}

}  // namespace

std::string_view to_string(AttributeKind kind) noexcept {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<AttributeKind> attribute_kind_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kAttributeKindCount; ++i) {
    if (kKindNames[i] == name) return static_cast<AttributeKind>(i);
  }
  return std::nullopt;
}

AttributeKind parse_attribute_kind(std::string_view label) noexcept {
  std::string key = text::normalize(label);
  if (auto k = attribute_kind_from_name(key)) return *k;
  if (key == "color") return AttributeKind::colour;
  if (key == "object description") return AttributeKind::object_description;
  return AttributeKind::other;
}

std::string UnitIdentity::render() const {
  std::string out = object_name;
  out.push_back(' ');
  out.append(to_string(kind));
  out.push_back(' ');
  out.append(value);
  return out;
}

SemanticUnit SemanticUnit::make(std::string_view object_name, AttributeKind kind,
                                std::string_view value, int source_round) {
  SemanticUnit u;
  u.object_name = text::normalize_object_name(object_name);
  u.kind = kind;
  u.value = text::normalize(value);
  u.source_round = source_round;
  if (u.object_name.empty()) {
    throw Error(ErrorCode::InvalidArgument, "semantic unit needs an object name");
  }
  if (u.value.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "semantic unit '" + u.object_name + "' has an empty value");
  }
  return u;
}

SemanticUnit SemanticUnit::existence(std::string_view object_name, int source_round) {
  return make(object_name, AttributeKind::object_description, kExistenceValue, source_round);
}

SemanticUnitTree build_tree(std::span<const SemanticUnit> units) {
  std::map<std::string, ObjectAccumulator> objects;
  for (const SemanticUnit& raw : units) {
    SemanticUnit u = SemanticUnit::make(raw.object_name, raw.kind, raw.value, raw.source_round);
    ObjectAccumulator& acc = objects[u.object_name];
    keep_min(acc.round, acc.seen, u.source_round);
    if (u.is_existence()) continue;
    auto key = std::make_pair(u.kind, u.value);
    auto it = acc.edges.find(key);
    if (it == acc.edges.end()) {
      acc.edges.emplace(std::move(key), u.source_round);
    } else {
      it->second = std::min(it->second, u.source_round);
    }
  }

  SemanticUnitTree tree;
  tree.objects_.reserve(objects.size());
  for (auto& [name, acc] : objects) {
    ObjectNode node{name, {}, acc.round};
    node.attributes.reserve(acc.edges.size());
    for (auto& [key, round] : acc.edges) {
      node.attributes.push_back({key.first, key.second, round});
    }
    tree.objects_.push_back(std::move(node));
  }
  return tree;
}

std::vector<SemanticUnit> SemanticUnitTree::units() const {
  std::vector<SemanticUnit> out;
  for (const ObjectNode& obj : objects_) {
    if (obj.attributes.empty()) {
      out.push_back({obj.name, AttributeKind::object_description,
                     std::string(kExistenceValue), obj.source_round});
      continue;
    }
    for (const AttributeEdge& e : obj.attributes) {
      out.push_back({obj.name, e.kind, e.value, e.source_round});
    }
  }
  return out;
}

bool SemanticUnitTree::contains(const UnitIdentity& id) const {
  auto it = std::lower_bound(objects_.begin(), objects_.end(), id.object_name,
                             [](const ObjectNode& n, const std::string& name) {
                               return n.name < name;
                             });
  if (it == objects_.end() || it->name != id.object_name) return false;
  if (it->attributes.empty()) {
    return id.kind == AttributeKind::object_description && id.value == kExistenceValue;
  }
  return std::any_of(it->attributes.begin(), it->attributes.end(), [&](const AttributeEdge& e) {
    return e.kind == id.kind && e.value == id.value;
  });
}

std::size_t unit_count(const SemanticUnitTree& tree) noexcept {
  std::size_t n = 0;
  for (const ObjectNode& obj : tree.objects()) {
    n += obj.attributes.empty() ? 1 : obj.attributes.size();
  }
  return n;
}

std::size_t Vocabulary::add(const UnitIdentity& id) {
  auto [it, inserted] = index_.emplace(id, entries_.size());
  if (inserted) entries_.push_back(id);
  return it->second;
}

void Vocabulary::extend(const SemanticUnitTree& tree) {
  for (const SemanticUnit& u : tree.units()) add(u.identity());
}

std::optional<std::size_t> Vocabulary::find(const UnitIdentity& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t SemanticVector::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

SemanticVector to_vector(const SemanticUnitTree& tree, const Vocabulary& vocabulary) {
  SemanticVector v{vocabulary.entries(), std::vector<std::uint8_t>(vocabulary.size(), 0)};
  for (const SemanticUnit& u : tree.units()) {
    auto idx = vocabulary.find(u.identity());
    if (!idx) {
      throw Error(ErrorCode::UnknownUnit,
                  "unit '" + u.identity().render() + "' is not in the vocabulary");
    }
    v.bits[*idx] = 1;
  }
  return v;
}

std::vector<SemanticUnit> residual(const SemanticUnitTree& previous,
                                   const SemanticUnitTree& current,
                                   const metrics::DuplicationMatcher& matcher) {
  std::vector<SemanticUnit> prev_units = previous.units();
  std::vector<SemanticUnit> cur_units;
  for (SemanticUnit& u : current.units()) {
    // A bare mention of an object already in `previous` adds nothing.
    if (u.is_existence() && std::any_of(previous.objects().begin(), previous.objects().end(),
                                        [&](const ObjectNode& o) { return o.name == u.object_name; })) {
      continue;
    }
    cur_units.push_back(std::move(u));
  }
  if (prev_units.empty() || cur_units.empty()) return cur_units;
  metrics::Matching m = metrics::match_units(prev_units, cur_units, matcher);
  std::vector<bool> matched(cur_units.size(), false);
  for (const auto& pair : m.pairs) matched[pair.second] = true;
  std::vector<SemanticUnit> out;
  for (std::size_t j = 0; j < cur_units.size(); ++j) {
    if (!matched[j]) out.push_back(cur_units[j]);
  }
  return out;
}

nlohmann::json to_extraction_json(const SemanticUnitTree& tree) {
  nlohmann::json doc = nlohmann::json::array();
  for (const ObjectNode& obj : tree.objects()) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const AttributeEdge& e : obj.attributes) {
      std::string key(to_string(e.kind));
      if (!attrs.contains(key)) {
        attrs[key] = nlohmann::json::array();
      }
      attrs[key].push_back(e.value);
    }
    for (auto& [key, values] : attrs.items()) {
      if (key != "other" && values.size() == 1) values = values[0];
    }
    doc.push_back({{"name", obj.name}, {"attributes", std::move(attrs)}});
  }
  return doc;
}

namespace {

void collect_values(const nlohmann::json& v, std::vector<std::string>& out) {
  if (v.is_null()) return;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_number() || v.is_boolean()) {
    out.push_back(v.dump());
  } else if (v.is_array()) {
    for (const auto& item : v) {
      if (item.is_array() || item.is_object()) {
        throw Error(ErrorCode::MalformedResponse, "nested attribute value");
      }
      collect_values(item, out);
    }
  } else {
    throw Error(ErrorCode::MalformedResponse, "attribute value must be a string or list");
  }
}

}  // namespace

std::vector<SemanticUnit> units_from_extraction_json(const nlohmann::json& doc,
                                                     int source_round) {
  if (!doc.is_array()) {
    throw Error(ErrorCode::MalformedResponse, "expected a JSON array of semantic units");
  }
  std::vector<SemanticUnit> units;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string()) {
      throw Error(ErrorCode::MalformedResponse, "every unit needs a string \"name\"");
    }
    std::string name = text::normalize_object_name(entry["name"].get<std::string>());
    if (name.empty()) {
      throw Error(ErrorCode::MalformedResponse, "empty object name");
    }
    std::size_t before = units.size();
    if (entry.contains("attributes") && !entry["attributes"].is_null()) {
      const auto& attrs = entry["attributes"];
      if (!attrs.is_object()) {
        throw Error(ErrorCode::MalformedResponse, "\"attributes\" must be an object");
      }
      for (const auto& [label, value] : attrs.items()) {
        AttributeKind kind = parse_attribute_kind(label);
        std::vector<std::string> values;
        collect_values(value, values);
        for (const std::string& raw : values) {
          if (text::normalize(raw).empty()) continue;
          units.push_back(SemanticUnit::make(name, kind, raw, source_round));
        }
      }
    }
    if (units.size() == before) units.push_back(SemanticUnit::existence(name, source_round));
  }
  return units;
}

nlohmann::json to_state_json(const SemanticUnit& unit) {
  return {{"name", unit.object_name},
          {"kind", to_string(unit.kind)},
          {"value", unit.value},
          {"round", unit.source_round}};
}

SemanticUnit unit_from_state_json(const nlohmann::json& doc) {
  auto kind = attribute_kind_from_name(doc.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown attribute kind in state");
  return SemanticUnit::make(doc.at("name").get<std::string>(), *kind,
                            doc.at("value").get<std::string>(), doc.at("round").get<int>());
}

nlohmann::json to_state_json(const SemanticUnitTree& tree) {
  nlohmann::json doc = nlohmann::json::array();
  for (const ObjectNode& obj : tree.objects()) {
    nlohmann::json edges = nlohmann::json::array();
    for (const AttributeEdge& e : obj.attributes) {
      edges.push_back({{"kind", to_string(e.kind)}, {"value", e.value}, {"round", e.source_round}});
    }
    doc.push_back({{"name", obj.name}, {"round", obj.source_round}, {"attributes", std::move(edges)}});
  }
  return doc;
}

SemanticUnitTree tree_from_state_json(const nlohmann::json& doc) {
  // Rebuild through build_tree() so canonical order and dedup are re-checked,
  // then restore object rounds that the unit list cannot carry.
  std::vector<SemanticUnit> units;
  std::map<std::string, int> object_rounds;
  for (const auto& obj : doc) {
    std::string name = obj.at("name").get<std::string>();
    int round = obj.at("round").get<int>();
    object_rounds[text::normalize_object_name(name)] = round;
    units.push_back(SemanticUnit::existence(name, round));
    for (const auto& e : obj.at("attributes")) {
      auto kind = attribute_kind_from_name(e.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown attribute kind in state");
      units.push_back(SemanticUnit::make(name, *kind, e.at("value").get<std::string>(),
                                         e.at("round").get<int>()));
    }
  }
  SemanticUnitTree tree = build_tree(units);
  for (ObjectNode& obj : tree.objects_) obj.source_round = object_rounds.at(obj.name);
  return tree;
}

}  // namespace cotalk::semantic
