#include "cotalk/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cotalk/assignment.hpp"
#include "cotalk/error.hpp"

namespace cotalk::metrics {

using semantic::SemanticUnit;

DuplicationMatcher DuplicationMatcher::embedding(std::shared_ptr<const EmbeddingProvider> provider,
                                                 double threshold) {
  if (!provider) throw Error(ErrorCode::InvalidArgument, "embedding mode needs a provider");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "similarity threshold must lie in [0, 1]");
  }
  DuplicationMatcher m;
  m.mode_ = MatchMode::embedding;
  m.threshold_ = threshold;
  m.provider_ = std::move(provider);
  return m;
}

std::vector<double> DuplicationMatcher::admissible_similarities(
    std::span<const SemanticUnit> a, std::span<const SemanticUnit> b) const {
  std::vector<double> sims(a.size() * b.size(), -1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (a[i].identity() == b[j].identity()) sims[i * b.size() + j] = 1.0;
    }
  }
  if (mode_ == MatchMode::exact || a.empty() || b.empty()) return sims;

  // Embed each distinct phrase once.
  std::map<std::string, std::size_t> slot;
  std::vector<std::string> phrases;
  auto index_of = [&](const SemanticUnit& u) {
    std::string p = u.identity().render();
    auto [it, inserted] = slot.emplace(p, phrases.size());
    if (inserted) phrases.push_back(std::move(p));
    return it->second;
  };
  std::vector<std::size_t> ai, bi;
  for (const auto& u : a) ai.push_back(index_of(u));
  for (const auto& u : b) bi.push_back(index_of(u));
  std::vector<Embedding> vecs = provider_->embed(phrases);
  if (vecs.size() != phrases.size()) {
    throw Error(ErrorCode::MalformedResponse, "embedding provider returned the wrong count");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double& s = sims[i * b.size() + j];
      if (s >= 1.0) continue;
      double c = cosine_similarity(vecs[ai[i]], vecs[bi[j]]);
      if (c >= threshold_) s = std::min(c, 1.0);
    }
  }
  return sims;
}

Matching match_units(std::span<const SemanticUnit> a, std::span<const SemanticUnit> b,
                     const DuplicationMatcher& matcher) {
  Matching out;
  if (a.empty() || b.empty()) return out;
  std::vector<double> sims = matcher.admissible_similarities(a, b);

  // Weight = cardinality bonus + quantized similarity, so any larger matching
  // beats any smaller one regardless of similarity.
  const std::int64_t scale = std::llround(1.0 / kSimilarityResolution);
  const std::int64_t bonus = static_cast<std::int64_t>(std::min(a.size(), b.size()) + 1) * scale;
  WeightMatrix w(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = sims[i * b.size() + j];
      if (s < 0.0) continue;
      w.at(i, j) = bonus + std::llround(std::clamp(s, 0.0, 1.0) * static_cast<double>(scale));
    }
  }
  auto assignment = solve_assignment(w);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (!assignment[i]) continue;
    out.pairs.emplace_back(i, *assignment[i]);
    out.total_similarity += sims[i * b.size() + *assignment[i]];
  }
  return out;
}

double duplication_rate(const semantic::SemanticUnitTree& earlier,
                        const semantic::SemanticUnitTree& later, const DuplicationMatcher& matcher) {
  std::vector<SemanticUnit> later_units = later.units();
  if (later_units.empty()) return 0.0;
  std::vector<SemanticUnit> earlier_units = earlier.units();
  Matching m = match_units(earlier_units, later_units, matcher);
  return 100.0 * static_cast<double>(m.size()) / static_cast<double>(later_units.size());
}

}  // namespace cotalk::metrics
