#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

namespace nngpw {

struct AssignmentResult {
  std::vector<std::ptrdiff_t> row_to_col;
  double total_cost = 0.0;
};

namespace detail {

/// Column prices from a Gauss-Seidel epsilon-scaling auction.
///
/// Only the dual prices are kept; they warm-start the exact augmenting-path
/// phase, which needs no particular property from them.
template <typename CostFn>
std::vector<double> auction_prices(std::ptrdiff_t n, CostFn& cost, double max_cost) {
  std::vector<double> price(static_cast<std::size_t>(n), 0.0);
  if (n < 2 || max_cost <= 0.0) return price;
  std::vector<std::ptrdiff_t> owner(static_cast<std::size_t>(n));
  std::deque<std::ptrdiff_t> unassigned;
  const double eps_final = 1e-4 * max_cost;
  for (double eps = 0.25 * max_cost;; eps /= 4.0) {
    std::fill(owner.begin(), owner.end(), -1);
    unassigned.clear();
    for (std::ptrdiff_t i = 0; i < n; ++i) unassigned.push_back(i);
    while (!unassigned.empty()) {
      const std::ptrdiff_t i = unassigned.front();
      unassigned.pop_front();
      double best = std::numeric_limits<double>::infinity();
      double second = best;
      std::ptrdiff_t best_col = 0;
      for (std::ptrdiff_t j = 0; j < n; ++j) {
        const double reduced = cost(i, j) + price[static_cast<std::size_t>(j)];
        if (reduced < second) {
          if (reduced < best) {
            second = best;
            best = reduced;
            best_col = j;
          } else {
            second = reduced;
          }
        }
      }
      price[static_cast<std::size_t>(best_col)] += (second - best) + eps;
      const std::ptrdiff_t previous = owner[static_cast<std::size_t>(best_col)];
      owner[static_cast<std::size_t>(best_col)] = i;
      if (previous >= 0) unassigned.push_back(previous);
    }
    if (eps <= eps_final) break;
  }
  return price;
}

}  // namespace detail

/// Exact dense linear assignment minimizing sum_i cost(i, row_to_col[i]).
///
/// Successive shortest augmenting paths in the Jonker-Volgenant form, one
/// per row, starting from an empty matching. Column potentials are
/// warm-started from an epsilon-scaling auction so that each Dijkstra-type
/// search terminates after few scanned rows. `cost(i, j)` is queried on
/// demand; no n x n matrix is stored.
template <typename CostFn>
AssignmentResult solve_assignment(std::size_t n, CostFn&& cost, bool warm_start = true) {
  using Index = std::ptrdiff_t;
  const auto size = static_cast<Index>(n);
  AssignmentResult result;
  if (size == 0) return result;

  double max_cost = 0.0;
  if (warm_start)
    for (Index i = 0; i < size; ++i)
      for (Index j = 0; j < size; ++j) max_cost = std::max(max_cost, cost(i, j));

  // v holds column potentials; reduced cost of (i, j) is cost(i, j) - v[j].
  std::vector<double> v = warm_start ? detail::auction_prices(size, cost, max_cost)
                                     : std::vector<double>(n, 0.0);
  for (double& value : v) value = -value;

  std::vector<Index> rowsol(n, -1), colsol(n, -1), collist(n), pred(n);
  std::vector<double> d(n);

  for (Index freerow = 0; freerow < size; ++freerow) {
    for (Index j = 0; j < size; ++j) {
      d[j] = cost(freerow, j) - v[j];
      pred[j] = freerow;
      collist[j] = j;
    }
    // collist[0, low) are scanned, [low, up) sit at the current minimum,
    // [up, n) are still to be reached.
    Index low = 0;
    Index up = 0;
    Index last = 0;
    Index endofpath = -1;
    bool found = false;
    double min = 0.0;
    do {
      if (up == low) {
        last = low - 1;
        min = d[collist[up++]];
        for (Index k = up; k < size; ++k) {
          const Index j = collist[k];
          const double h = d[j];
          if (h <= min) {
            if (h < min) {
              up = low;
              min = h;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
        }
        for (Index k = low; k < up; ++k) {
          if (colsol[collist[k]] < 0) {
            endofpath = collist[k];
            found = true;
            break;
          }
        }
      }
      if (!found) {
        const Index j1 = collist[low++];
        const Index i = colsol[j1];
        const double h = cost(i, j1) - v[j1] - min;
        for (Index k = up; k < size; ++k) {
          const Index j = collist[k];
          const double v2 = cost(i, j) - v[j] - h;
          if (v2 < d[j]) {
            pred[j] = i;
            if (v2 <= min) {
              if (colsol[j] < 0) {
                endofpath = j;
                found = true;
                break;
              }
              collist[k] = collist[up];
              collist[up++] = j;
            }
            d[j] = v2;
          }
        }
      }
    } while (!found);

    // Potentials of scanned columns move by their distance past the minimum.
    for (Index k = 0; k <= last; ++k) {
      const Index j1 = collist[k];
      v[j1] += d[j1] - min;
    }
    Index i = -1;
    do {
      i = pred[endofpath];
      colsol[endofpath] = i;
      const Index j1 = endofpath;
      endofpath = rowsol[i];
      rowsol[i] = j1;
    } while (i != freerow);
  }

  result.row_to_col.assign(rowsol.begin(), rowsol.end());
  for (Index i = 0; i < size; ++i) result.total_cost += cost(i, rowsol[i]);
  return result;
}

}  // namespace nngpw
