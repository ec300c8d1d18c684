#include "cotalk/assignment.hpp"

#include <algorithm>
#include <limits>

namespace cotalk::metrics {

namespace {

// Minimum-cost assignment of every row of an n x m matrix (n <= m) on cost
// = -weight, where inadmissible entries cost 0. Returns the maximum weight.
std::int64_t hungarian(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols,
                       const WeightMatrix& m, bool transposed) {
  const std::size_t n = rows.size();
  const std::size_t k = cols.size();
  if (n == 0 || k == 0) return 0;
  auto weight = [&](std::size_t r, std::size_t c) -> std::int64_t {
    std::int64_t v = transposed ? m.at(cols[c], rows[r]) : m.at(rows[r], cols[c]);
    return v > 0 ? v : 0;
  };
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(k + 1, 0);
  std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(k + 1, kInf);
    std::vector<char> used(k + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0];
      std::size_t j1 = 0;
      std::int64_t delta = kInf;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        std::int64_t cur = -weight(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::int64_t total = 0;
  for (std::size_t j = 1; j <= k; ++j) {
    if (p[j] != 0) total += weight(p[j] - 1, j - 1);
  }
  return total;
}

std::int64_t best_value(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols,
                        const WeightMatrix& m) {
  if (rows.size() <= cols.size()) return hungarian(rows, cols, m, false);
  return hungarian(cols, rows, m, true);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

}  // namespace

std::int64_t max_assignment_value(const WeightMatrix& m) {
  return best_value(iota(m.rows), iota(m.cols), m);
}

std::vector<std::optional<std::size_t>> solve_assignment(const WeightMatrix& m) {
  std::vector<std::optional<std::size_t>> result(m.rows);

  // Fast path: when no row or column has two admissible partners the matching
  // is forced.
  std::vector<int> row_deg(m.rows, 0), col_deg(m.cols, 0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (m.at(i, j) > 0) {
        ++row_deg[i];
        ++col_deg[j];
      }
    }
  }
  bool forced = std::all_of(row_deg.begin(), row_deg.end(), [](int d) { return d <= 1; }) &&
                std::all_of(col_deg.begin(), col_deg.end(), [](int d) { return d <= 1; });
  if (forced) {
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) {
        if (m.at(i, j) > 0) result[i] = j;
      }
    }
    return result;
  }

  const std::int64_t optimum = max_assignment_value(m);
  std::vector<std::size_t> free_cols = iota(m.cols);
  std::int64_t fixed = 0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t r = i + 1; r < m.rows; ++r) rest_rows.push_back(r);
    for (std::size_t idx = 0; idx < free_cols.size(); ++idx) {
      std::size_t j = free_cols[idx];
      std::int64_t wij = m.at(i, j);
      if (wij <= 0) continue;
      std::vector<std::size_t> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(idx));
      if (fixed + wij + best_value(rest_rows, rest_cols, m) == optimum) {
        result[i] = j;
        fixed += wij;
        free_cols = std::move(rest_cols);
        break;
      }
    }
  }
  return result;
}

}  // namespace cotalk::metrics
