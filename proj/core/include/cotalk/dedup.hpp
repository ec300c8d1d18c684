#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "cotalk/embedding.hpp"
#include "cotalk/semantic_model.hpp"

namespace cotalk::metrics {

inline constexpr double kDefaultSimilarityThreshold = 0.85;

/// Similarities are compared at this resolution so that ties are exact.
inline constexpr double kSimilarityResolution = 1e-6;

enum class MatchMode { exact, embedding };

/// Decides which unit pairs count as duplicates. Exact mode ignores the
/// threshold and provider.
class DuplicationMatcher {
 public:
  static DuplicationMatcher exact() { return DuplicationMatcher(); }
  static DuplicationMatcher embedding(std::shared_ptr<const EmbeddingProvider> provider,
                                      double threshold = kDefaultSimilarityThreshold);

  MatchMode mode() const noexcept { return mode_; }
  double threshold() const noexcept { return threshold_; }
  const std::shared_ptr<const EmbeddingProvider>& provider() const noexcept { return provider_; }

  /// Row-major |a| x |b| similarities for admissible pairs, -1 elsewhere.
  /// Identical identities always score 1.
  std::vector<double> admissible_similarities(std::span<const semantic::SemanticUnit> a,
                                              std::span<const semantic::SemanticUnit> b) const;

 private:
  DuplicationMatcher() = default;

  MatchMode mode_ = MatchMode::exact;
  double threshold_ = kDefaultSimilarityThreshold;
  std::shared_ptr<const EmbeddingProvider> provider_;
};

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (index in a, index in b)
  double total_similarity = 0.0;

  std::size_t size() const noexcept { return pairs.size(); }
};

/// Maximum-cardinality one-to-one matching; among those, maximum total
/// similarity; remaining ties go to the row-lexicographically smallest.
Matching match_units(std::span<const semantic::SemanticUnit> a,
                     std::span<const semantic::SemanticUnit> b, const DuplicationMatcher& matcher);

/// 100 * matched units of `later` / unit_count(later); 0 for an empty `later`.
double duplication_rate(const semantic::SemanticUnitTree& earlier,
                        const semantic::SemanticUnitTree& later, const DuplicationMatcher& matcher);

}  // namespace cotalk::metrics
