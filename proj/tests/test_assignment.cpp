#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "xalign/assignment.hpp"

using namespace xalign;
using xalign::testing::brute_force_assignment;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> pair_list(const MatchSet& m) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : m.pairs) out.emplace_back(p.idx3d, p.idx2d);
  return out;
}

}  // namespace

TEST_CASE("hungarian: diagonal optimum") {
  CostMatrix c;
  c.values.resize(2, 2);
  c.values << 0, 1, 1, 0;
  const MatchSet m = hungarian(c);
  REQUIRE(m.pairs.size() == 2);
  CHECK(pair_list(m) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  CHECK(assignment_total(c, m) == 0.0);
}

TEST_CASE("hungarian: singleton") {
  CostMatrix c;
  c.values.resize(1, 1);
  c.values << 5;
  const MatchSet m = hungarian(c);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].idx3d == 0);
  CHECK(m.pairs[0].idx2d == 0);
  CHECK(m.pairs[0].residual == 5.0);
}

TEST_CASE("hungarian: empty input yields an empty match") {
  CostMatrix c;
  c.values.resize(0, 3);
  const MatchSet m = hungarian(c);
  CHECK(m.pairs.empty());
  CHECK(m.unmatched2d == std::vector<std::size_t>{0, 1, 2});
  c.values.resize(2, 0);
  CHECK(hungarian(c).unmatched3d == std::vector<std::size_t>{0, 1});
}

TEST_CASE("hungarian: non-finite entries are rejected") {
  CostMatrix c;
  c.values = Eigen::MatrixXd::Zero(2, 2);
  c.values(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian(c), std::invalid_argument);
}

TEST_CASE("hungarian: maximize orientation") {
  CostMatrix c;
  c.values.resize(2, 3);
  c.values << 1, 9, 2, 8, 7, 3;
  c.orientation = Orientation::kMaximize;
  const MatchSet m = hungarian(c);
  CHECK(pair_list(m) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
  CHECK(m.unmatched2d == std::vector<std::size_t>{2});
}

TEST_CASE("hungarian: ties resolve to the lexicographically smallest pairing") {
  CostMatrix c;
  c.values = Eigen::MatrixXd::Zero(3, 3);
  CHECK(pair_list(hungarian(c)) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}, {2, 2}});

  c.values = Eigen::MatrixXd::Ones(4, 2);
  CHECK(pair_list(hungarian(c)) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});

  c.values.resize(2, 2);
  c.values << 1, 1, 1, 1;
  c.values(1, 0) = 1;
  CHECK(pair_list(hungarian(c)) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});

  // Integer matrices with many ties: the oracle's tie-break is lexicographic too.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(0, 2);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    CostMatrix t;
    t.values.resize(dim(rng), dim(rng));
    for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values(i) = small(rng);
    const auto brute = brute_force_assignment(t.values);
    const MatchSet m = hungarian(t);
    CHECK(assignment_total(t, m) == brute.total);
    CHECK(pair_list(m) == brute.pairs);
  }
}

TEST_CASE("hungarian: equals the brute-force optimum on random matrices") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> value(-10.0, 10.0);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    CostMatrix c;
    c.values.resize(dim(rng), dim(rng));
    for (Eigen::Index i = 0; i < c.values.size(); ++i) c.values(i) = value(rng);
    c.orientation = trial % 2 == 0 ? Orientation::kMinimize : Orientation::kMaximize;
    const auto brute = brute_force_assignment(c.values, c.orientation == Orientation::kMaximize);
    const MatchSet m = hungarian(c);
    CHECK(m.pairs.size() == static_cast<std::size_t>(std::min(c.values.rows(), c.values.cols())));
    CHECK(m.is_injective());
    CHECK(m.partitions(static_cast<std::size_t>(c.values.rows()), static_cast<std::size_t>(c.values.cols())));
    CHECK(assignment_total(c, m) == brute.total);
  }
}

TEST_CASE("hungarian: fixed 5x5 and 4x6 instances") {
  // Expected totals frozen from brute_force_assignment (cross-checked with scipy).
  CostMatrix a;
  a.values.resize(5, 5);
  a.values << 7, 3, 9, 4, 8, 2, 6, 1, 5, 9, 8, 4, 7, 3, 6, 5, 9, 2, 8, 1, 3, 7, 6, 2, 4;
  CostMatrix b;
  b.values.resize(4, 6);
  b.values << 12, 5, 9, 14, 3, 8, 6, 11, 4, 7, 10, 2, 9, 3, 13, 5, 6, 12, 4, 8, 7, 2, 11, 9;
  CHECK(brute_force_assignment(a.values).total == 11.0);
  CHECK(brute_force_assignment(b.values).total == 10.0);
  CHECK(assignment_total(a, hungarian(a)) == 11.0);
  CHECK(assignment_total(b, hungarian(b)) == 10.0);
}

TEST_CASE("MatchSet bookkeeping") {
  MatchSet m;
  m.pairs = {{2, 0, std::nullopt}, {0, 1, std::nullopt}};
  m.complete(3, 3);
  CHECK(m.pairs[0].idx3d == 0);
  CHECK(m.unmatched3d == std::vector<std::size_t>{1});
  CHECK(m.unmatched2d == std::vector<std::size_t>{2});
  CHECK(m.partitions(3, 3));
  CHECK(m.partner_of_3d(2) == std::optional<std::size_t>(0));
  CHECK_FALSE(m.partner_of_3d(1).has_value());
  m.pairs.push_back({1, 1, std::nullopt});
  CHECK_FALSE(m.is_injective());
}
