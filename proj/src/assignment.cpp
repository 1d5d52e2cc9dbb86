#include "xalign/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace xalign {

std::optional<std::size_t> MatchSet::partner_of_3d(std::size_t idx3d) const {
  for (const auto& p : pairs)
    if (p.idx3d == idx3d) return p.idx2d;
  return std::nullopt;
}

bool MatchSet::is_injective() const {
  std::vector<std::size_t> a, b;
  for (const auto& p : pairs) {
    a.push_back(p.idx3d);
    b.push_back(p.idx2d);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return std::adjacent_find(a.begin(), a.end()) == a.end() && std::adjacent_find(b.begin(), b.end()) == b.end();
}

bool MatchSet::partitions(std::size_t n3d, std::size_t n2d) const {
  std::vector<int> seen3(n3d, 0), seen2(n2d, 0);
  for (const auto& p : pairs) {
    if (p.idx3d >= n3d || p.idx2d >= n2d) return false;
    ++seen3[p.idx3d];
    ++seen2[p.idx2d];
  }
  for (auto i : unmatched3d) {
    if (i >= n3d) return false;
    ++seen3[i];
  }
  for (auto j : unmatched2d) {
    if (j >= n2d) return false;
    ++seen2[j];
  }
  return std::all_of(seen3.begin(), seen3.end(), [](int c) { return c == 1; }) &&
         std::all_of(seen2.begin(), seen2.end(), [](int c) { return c == 1; });
}

void MatchSet::complete(std::size_t n3d, std::size_t n2d) {
  std::sort(pairs.begin(), pairs.end(), [](const MatchPair& a, const MatchPair& b) { return a.idx3d < b.idx3d; });
  std::vector<bool> used3(n3d, false), used2(n2d, false);
  for (const auto& p : pairs) {
    used3[p.idx3d] = true;
    used2[p.idx2d] = true;
  }
  unmatched3d.clear();
  unmatched2d.clear();
  for (std::size_t i = 0; i < n3d; ++i)
    if (!used3[i]) unmatched3d.push_back(i);
  for (std::size_t j = 0; j < n2d; ++j)
    if (!used2[j]) unmatched2d.push_back(j);
}

double assignment_total(const CostMatrix& cost, const MatchSet& match) {
  double total = 0.0;
  for (const auto& p : match.pairs) total += cost.values(static_cast<Eigen::Index>(p.idx3d), static_cast<Eigen::Index>(p.idx2d));
  return total;
}

namespace {

// Kuhn's augmenting-path search restricted to the tight edges.
class TightGraph {
 public:
  TightGraph(std::vector<std::vector<int>> adjacency, int n) : adj_(std::move(adjacency)), n_(n) {}

  // True when rows >= first_free can all be matched to columns not in taken.
  bool completable(int first_free, const std::vector<bool>& taken) const {
    std::vector<int> owner(static_cast<std::size_t>(n_), -1);
    for (int row = first_free; row < n_; ++row) {
      std::vector<bool> visited(static_cast<std::size_t>(n_), false);
      if (!augment(row, taken, owner, visited)) return false;
    }
    return true;
  }

  const std::vector<int>& edges(int row) const { return adj_[static_cast<std::size_t>(row)]; }

 private:
  bool augment(int row, const std::vector<bool>& taken, std::vector<int>& owner, std::vector<bool>& visited) const {
    for (int col : adj_[static_cast<std::size_t>(row)]) {
      const auto c = static_cast<std::size_t>(col);
      if (taken[c] || visited[c]) continue;
      visited[c] = true;
      if (owner[c] < 0 || augment(owner[c], taken, owner, visited)) {
        owner[c] = row;
        return true;
      }
    }
    return false;
  }

  std::vector<std::vector<int>> adj_;
  int n_;
};

// Another perfect matching exists in the tight graph iff the "row i can take the
// column currently held by row k" digraph has a cycle.
bool has_alternating_cycle(const std::vector<std::vector<int>>& adj, const std::vector<int>& row_to_col,
                           const std::vector<int>& col_to_row) {
  const std::size_t n = adj.size();
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::function<bool(std::size_t)> dfs = [&](std::size_t r) {
    state[r] = 1;
    for (int col : adj[r]) {
      if (col == row_to_col[r]) continue;
      const auto next = static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(col)]);
      if (state[next] == 1) return true;
      if (state[next] == 0 && dfs(next)) return true;
    }
    state[r] = 2;
    return false;
  };
  for (std::size_t r = 0; r < n; ++r)
    if (state[r] == 0 && dfs(r)) return true;
  return false;
}

}  // namespace

MatchSet hungarian(const CostMatrix& cost) {
  const auto rows = static_cast<int>(cost.values.rows());
  const auto cols = static_cast<int>(cost.values.cols());
  MatchSet out;
  if (rows == 0 || cols == 0) {
    out.complete(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    return out;
  }
  if (!cost.values.allFinite()) throw std::invalid_argument("hungarian: cost matrix has non-finite entries");

  const int n = std::max(rows, cols);
  const double sign = cost.orientation == Orientation::kMaximize ? -1.0 : 1.0;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  c.topLeftCorner(rows, cols) = sign * cost.values;
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());

  // Shortest augmenting path with potentials (1-based, column 0 is a sentinel).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const double cur = c(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          u[static_cast<std::size_t>(p[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1), col_to_row(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    col_to_row[static_cast<std::size_t>(j - 1)] = p[static_cast<std::size_t>(j)] - 1;
  }

  // Every optimal assignment lives on the edges that are tight under the final potentials.
  const double eps = 1e-11 * scale * n;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (c(i, j) - u[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(j + 1)] <= eps)
        adj[static_cast<std::size_t>(i)].push_back(j);
  for (int i = 0; i < n; ++i) {
    auto& a = adj[static_cast<std::size_t>(i)];
    if (std::find(a.begin(), a.end(), row_to_col[static_cast<std::size_t>(i)]) == a.end())
      a.push_back(row_to_col[static_cast<std::size_t>(i)]);
    std::sort(a.begin(), a.end());
  }

  if (has_alternating_cycle(adj, row_to_col, col_to_row)) {
    // Ties: fix rows in order, each to the smallest real column that still
    // admits a completion (a dummy column means "unmatched" and sorts last).
    const TightGraph graph(adj, n);
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
      std::vector<int> order = graph.edges(i);
      std::stable_partition(order.begin(), order.end(), [&](int col) { return col < cols; });
      bool placed = false;
      for (int col : order) {
        if (taken[static_cast<std::size_t>(col)]) continue;
        taken[static_cast<std::size_t>(col)] = true;
        if (graph.completable(i + 1, taken)) {
          row_to_col[static_cast<std::size_t>(i)] = col;
          placed = true;
          break;
        }
        taken[static_cast<std::size_t>(col)] = false;
      }
      if (!placed) throw std::logic_error("hungarian: tight graph lost its perfect matching");
    }
  }

  for (int i = 0; i < rows; ++i) {
    const int j = row_to_col[static_cast<std::size_t>(i)];
    if (j < cols)
      out.pairs.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), cost.values(i, j)});
  }
  out.complete(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  return out;
}

}  // namespace xalign
