#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cotalk::metrics {
class DuplicationMatcher;
}

namespace cotalk::semantic {

/// Attribute categories a semantic unit can carry. Declaration order is the
/// canonical edge order.
enum class AttributeKind : std::uint8_t {
  absolute_location,
  relative_location,
  colour,
  amount,
  size,
  shape,
  material,
  object_description,
  other,
};

inline constexpr std::size_t kAttributeKindCount = 9;

std::string_view to_string(AttributeKind kind) noexcept;

/// Maps an extraction label onto a kind. Unknown labels become `other`.
AttributeKind parse_attribute_kind(std::string_view label) noexcept;

/// Strict inverse of to_string(); nullopt for anything else.
std::optional<AttributeKind> attribute_kind_from_name(std::string_view name) noexcept;

/// Value carried by the implicit edge of an object mentioned without attributes.
inline constexpr std::string_view kExistenceValue = "present";

struct UnitIdentity {
  std::string object_name;
  AttributeKind kind = AttributeKind::other;
  std::string value;

  auto operator<=>(const UnitIdentity&) const = default;
  bool operator==(const UnitIdentity&) const = default;

  /// "object kind value", the phrase handed to embedding providers.
  std::string render() const;
};

struct SemanticUnit {
  std::string object_name;
  AttributeKind kind = AttributeKind::other;
  std::string value;
  int source_round = 0;

  /// Normalizing constructor; throws InvalidArgument for an empty name, or an
  /// empty value on anything but the existence unit.
  static SemanticUnit make(std::string_view object_name, AttributeKind kind,
                           std::string_view value, int source_round = 0);
  static SemanticUnit existence(std::string_view object_name, int source_round = 0);

  UnitIdentity identity() const { return {object_name, kind, value}; }
  bool is_existence() const noexcept {
    return kind == AttributeKind::object_description && value == kExistenceValue;
  }

  bool operator==(const SemanticUnit&) const = default;
};

struct AttributeEdge {
  AttributeKind kind = AttributeKind::other;
  std::string value;
  int source_round = 0;

  bool operator==(const AttributeEdge&) const = default;
};

struct ObjectNode {
  std::string name;
  std::vector<AttributeEdge> attributes;
  int source_round = 0;

  bool operator==(const ObjectNode&) const = default;
};

/// Image -> objects -> attribute edges. Objects are sorted by name and edges
/// by (kind, value); only build_tree() constructs non-empty trees.
class SemanticUnitTree {
 public:
  static constexpr std::string_view kRootLabel = "Image";

  SemanticUnitTree() = default;

  const std::vector<ObjectNode>& objects() const noexcept { return objects_; }
  bool empty() const noexcept { return objects_.empty(); }

  /// Every edge as a unit, plus one existence unit per attribute-less object,
  /// in canonical order.
  std::vector<SemanticUnit> units() const;

  bool contains(const UnitIdentity& id) const;

  bool operator==(const SemanticUnitTree&) const = default;

 private:
  friend SemanticUnitTree build_tree(std::span<const SemanticUnit> units);
  friend SemanticUnitTree tree_from_state_json(const nlohmann::json& doc);
  std::vector<ObjectNode> objects_;
};

SemanticUnitTree build_tree(std::span<const SemanticUnit> units);
SemanticUnitTree tree_from_state_json(const nlohmann::json& doc);

std::size_t unit_count(const SemanticUnitTree& tree) noexcept;

/// Open vocabulary of unit identities; indices are stable once assigned.
class Vocabulary {
 public:
  /// Returns the index of `id`, appending it when new.
  std::size_t add(const UnitIdentity& id);
  void extend(const SemanticUnitTree& tree);

  std::optional<std::size_t> find(const UnitIdentity& id) const;
  const UnitIdentity& at(std::size_t i) const { return entries_.at(i); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<UnitIdentity>& entries() const noexcept { return entries_; }

 private:
  std::vector<UnitIdentity> entries_;
  std::map<UnitIdentity, std::size_t> index_;
};

struct SemanticVector {
  std::vector<UnitIdentity> vocabulary;
  std::vector<std::uint8_t> bits;

  std::size_t popcount() const noexcept;
};

/// h(.): bit i is set iff vocabulary entry i is a unit of `tree`. Throws
/// UnknownUnit when the tree holds an identity missing from the vocabulary.
SemanticVector to_vector(const SemanticUnitTree& tree, const Vocabulary& vocabulary);

/// Units of `current` left unmatched by a one-to-one matching against
/// `previous`. The existence unit of an object `previous` already names is
/// never residual. Propagates matcher/provider errors.
std::vector<SemanticUnit> residual(const SemanticUnitTree& previous,
                                   const SemanticUnitTree& current,
                                   const metrics::DuplicationMatcher& matcher);

// Extraction document: [{"name": ..., "attributes": {kind: value | [values]}}]

nlohmann::json to_extraction_json(const SemanticUnitTree& tree);

/// Throws MalformedResponse when the document does not follow the schema.
std::vector<SemanticUnit> units_from_extraction_json(const nlohmann::json& doc,
                                                     int source_round = 0);

// Internal form used by session persistence; keeps source rounds.
nlohmann::json to_state_json(const SemanticUnitTree& tree);
SemanticUnitTree tree_from_state_json(const nlohmann::json& doc);
nlohmann::json to_state_json(const SemanticUnit& unit);
SemanticUnit unit_from_state_json(const nlohmann::json& doc);

}  // namespace cotalk::semantic
