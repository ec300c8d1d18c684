#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace cotalk::metrics {

/// Dense rows x cols weights; a weight <= 0 marks an inadmissible pair.
struct WeightMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> w;

  WeightMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), w(r * c, 0) {}
  std::int64_t& at(std::size_t i, std::size_t j) { return w[i * cols + j]; }
  std::int64_t at(std::size_t i, std::size_t j) const { return w[i * cols + j]; }
};

/// Maximum total weight over one-to-one matchings of admissible pairs
/// (Hungarian method, O(n^2 m)).
std::int64_t max_assignment_value(const WeightMatrix& m);

/// An optimal matching; row i -> column or nullopt. Among optimal matchings
/// the row-lexicographically smallest is returned: each row, in order, takes
/// the smallest column that still allows the optimum, and is left unmatched
/// only when no column does.
std::vector<std::optional<std::size_t>> solve_assignment(const WeightMatrix& m);

}  // namespace cotalk::metrics
