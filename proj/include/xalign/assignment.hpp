#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace xalign {

struct MatchPair {
  std::size_t idx3d = 0;
  std::size_t idx2d = 0;
  // Mean reprojection error in pixels once evaluated; for a bare assignment, the matrix entry.
  std::optional<double> residual;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

// Injective pairing between 3D-person and 2D-person indices. pairs is sorted by idx3d.
struct MatchSet {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched3d;
  std::vector<std::size_t> unmatched2d;

  bool empty() const { return pairs.empty(); }
  std::optional<std::size_t> partner_of_3d(std::size_t idx3d) const;
  bool is_injective() const;
  // pairs and the unmatched lists partition [0, n3d) and [0, n2d).
  bool partitions(std::size_t n3d, std::size_t n2d) const;
  // Recomputes the unmatched lists from pairs.
  void complete(std::size_t n3d, std::size_t n2d);

  friend bool operator==(const MatchSet&, const MatchSet&) = default;
};

enum class Orientation { kMinimize, kMaximize };

struct CostMatrix {
  Eigen::MatrixXd values;
  Orientation orientation = Orientation::kMinimize;
};

// Optimal rectangular assignment of min(rows, cols) pairs. Among equal optima the
// pair list that is lexicographically smallest in (idx3d, idx2d) wins.
// An empty matrix yields an empty MatchSet; non-finite entries throw std::invalid_argument.
MatchSet hungarian(const CostMatrix& cost);

// Sum of the chosen entries in idx3d order.
double assignment_total(const CostMatrix& cost, const MatchSet& match);

}  // namespace xalign
