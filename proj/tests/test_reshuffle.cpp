#include <array>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "bell/errors.hpp"
#include "bell/experiment.hpp"
#include "bell/models.hpp"
#include "bell/reshuffle.hpp"
#include "bell/rng.hpp"
#include "doctest.h"

namespace rs = bell::reshuffle;
namespace ex = bell::experiment;
namespace md = bell::models;
using rs::CountMatrix;
using rs::CountTable;

namespace {

// Exhaustive oracle: enumerate every multiset of quadruple rows of size n
// (compositions of n into 16 cells) and test whether one projects onto all
// four tables. Only workable for tiny n; that is the point.
CountTable project(const std::array<long, 16>& cells) {
  CountTable t;
  for (int idx = 0; idx < 16; ++idx) {
    const int a = (idx >> 3) & 1, ap = (idx >> 2) & 1;
    const int b = (idx >> 1) & 1, bp = idx & 1;
    t.tables[0][a][b] += cells[idx];
    t.tables[1][a][bp] += cells[idx];
    t.tables[2][ap][b] += cells[idx];
    t.tables[3][ap][bp] += cells[idx];
  }
  return t;
}

bool tables_equal(const CountTable& x, const CountTable& y) {
  for (int t = 0; t < 4; ++t)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (x.tables[t][i][j] != y.tables[t][i][j]) return false;
  return true;
}

bool oracle_feasible_rec(const CountTable& target, CountTable& acc, int idx,
                         long remaining) {
  if (remaining == 0) return tables_equal(acc, target);
  if (idx == 16) return false;
  const int a = (idx >> 3) & 1, ap = (idx >> 2) & 1;
  const int b = (idx >> 1) & 1, bp = idx & 1;
  long* slots[4] = {&acc.tables[0][a][b], &acc.tables[1][a][bp],
                    &acc.tables[2][ap][b], &acc.tables[3][ap][bp]};
  const long caps[4] = {target.tables[0][a][b], target.tables[1][a][bp],
                        target.tables[2][ap][b], target.tables[3][ap][bp]};
  long cap = remaining;
  for (int i = 0; i < 4; ++i) cap = std::min(cap, caps[i] - *slots[i]);
  for (long v = 0; v <= cap; ++v) {
    for (long* s : slots) *s += v;
    const bool ok = oracle_feasible_rec(target, acc, idx + 1, remaining - v);
    for (long* s : slots) *s -= v;
    if (ok) return true;
  }
  return false;
}

bool oracle_feasible(const CountTable& target) {
  CountTable acc;
  return oracle_feasible_rec(target, acc, 0, target.total());
}

// Random-instance generators covering the three regimes: projections of
// quadruple counts (always feasible), unconstrained tables (usually break
// a marginal), and marginal-consistent tables (exercise the count
// inequalities and the constructive path).
CountTable random_projection(long n, bell::RngStream& g) {
  std::array<long, 16> cells{};
  for (long i = 0; i < n; ++i) ++cells[g.next_below(16)];
  return project(cells);
}

CountTable random_free(long n, bell::RngStream& g) {
  CountTable t;
  for (int k = 0; k < 4; ++k)
    for (long i = 0; i < n; ++i)
      ++t.tables[k][g.next_below(2)][g.next_below(2)];
  return t;
}

CountTable random_marginal_consistent(long n, bell::RngStream& g) {
  // Shared single-arm counts first, then each table fills its free cell
  // within the transportation bounds for its row/column sums.
  const long na[2] = {static_cast<long>(g.next_below(n + 1)),
                      static_cast<long>(g.next_below(n + 1))};
  const long nb[2] = {static_cast<long>(g.next_below(n + 1)),
                      static_cast<long>(g.next_below(n + 1))};
  CountTable t;
  for (int k = 0; k < 4; ++k) {
    const long r0 = na[k / 2], c0 = nb[k % 2];
    const long lo = std::max(0L, r0 + c0 - n), hi = std::min(r0, c0);
    const long v = lo + static_cast<long>(g.next_below(hi - lo + 1));
    t.tables[k][0][0] = v;
    t.tables[k][0][1] = r0 - v;
    t.tables[k][1][0] = c0 - v;
    t.tables[k][1][1] = n - r0 - c0 + v;
  }
  return t;
}

}  // namespace

TEST_CASE("feasibility agrees with the exhaustive oracle on small cases") {
  bell::RngStream g(601);
  int feasible_seen = 0, infeasible_seen = 0;
  for (int rep = 0; rep < 900; ++rep) {
    const long n = 1 + static_cast<long>(g.next_below(6));
    CountTable t;
    switch (rep % 3) {
      case 0: t = random_projection(n, g); break;
      case 1: t = random_free(n, g); break;
      default: t = random_marginal_consistent(n, g); break;
    }
    const rs::ReshuffleResult got = rs::reshuffle_feasibility(t);
    const bool want = oracle_feasible(t);
    REQUIRE(got.feasible == want);
    if (want) {
      ++feasible_seen;
      CHECK(tables_equal(project(got.witness), t));
      CHECK(got.max_count_excess <= 0);
      CHECK(got.violated_condition.empty());
    } else {
      ++infeasible_seen;
      CHECK(!got.violated_condition.empty());
    }
  }
  // The mix must actually exercise both verdicts.
  CHECK(feasible_seen > 100);
  CHECK(infeasible_seen > 100);
}

TEST_CASE("projections of quadruple counts are always feasible") {
  bell::RngStream g(907);
  for (int rep = 0; rep < 200; ++rep) {
    const long n = 1 + static_cast<long>(g.next_below(500));
    const CountTable t = random_projection(n, g);
    const rs::ReshuffleResult r = rs::reshuffle_feasibility(t);
    REQUIRE(r.feasible);
    CHECK(tables_equal(project(r.witness), t));
    long witness_total = 0;
    for (long c : r.witness) {
      CHECK(c >= 0);
      witness_total += c;
    }
    CHECK(witness_total == n);
  }
}

TEST_CASE("single crafted row with combination 4 is infeasible") {
  // One row per context: (+,+), (+,-), (+,+), (+,+) gives the count
  // combination C1 - C2 + C3 + C4 = 4 > 2N = 2. No quadruple multiset can
  // produce it, and the verdict says which constraint broke.
  CountTable t;
  t.tables[0] = CountMatrix{{{1, 0}, {0, 0}}};
  t.tables[1] = CountMatrix{{{0, 1}, {0, 0}}};
  t.tables[2] = CountMatrix{{{1, 0}, {0, 0}}};
  t.tables[3] = CountMatrix{{{1, 0}, {0, 0}}};
  const rs::ReshuffleResult r = rs::reshuffle_feasibility(t);
  CHECK(r.feasible == false);
  CHECK(!r.violated_condition.empty());
  CHECK(r.max_count_excess == 2);
  CHECK(oracle_feasible(t) == false);
}

TEST_CASE("cosine-pattern tables at the standard design break a count bound") {
  // Marginal-consistent by construction (all single-arm counts equal n/2),
  // so only a count inequality can reject them, and one does: the
  // correlation pattern reaches 2*sqrt(2) * n.
  const long n = 10000;
  const double e[4] = {-std::sqrt(0.5), std::sqrt(0.5), -std::sqrt(0.5),
                       -std::sqrt(0.5)};
  CountTable t;
  for (int k = 0; k < 4; ++k) {
    const long npp = std::lround(n * (1.0 + e[k]) / 4.0);
    const long npm = n / 2 - npp;
    t.tables[k][0][0] = npp;
    t.tables[k][1][1] = npp;
    t.tables[k][0][1] = npm;
    t.tables[k][1][0] = npm;
  }
  const rs::ReshuffleResult r = rs::reshuffle_feasibility(t);
  CHECK(r.feasible == false);
  CHECK(r.violated_condition.find("count inequality") != std::string::npos);
  CHECK(r.max_count_excess > 8000);
  CHECK(r.max_count_excess < 8600);
}

TEST_CASE("counterfactual runs project to feasible tables with slack") {
  const ex::QuadrupleSheet q = ex::run_counterfactual_experiment(
      md::ModelSpec::lrhvm_reference(), md::Design::standard(), 5000, 61);
  const CountTable t = CountTable::from_quadruples(q);
  CHECK(t.total() == 5000);
  const rs::ReshuffleResult r = rs::reshuffle_feasibility(t);
  REQUIRE(r.feasible);
  CHECK(tables_equal(project(r.witness), t));
  CHECK(r.max_count_excess <= 0);
}

TEST_CASE("independently sampled sheets are rejected by a named marginal") {
  const ex::PairExperiment pe = ex::run_pair_experiments(
      md::ModelSpec::quantum_singlet(), md::Design::standard(), 10000, 67);
  const CountTable t = CountTable::from_pair_sheets(pe.sheets);
  const rs::ReshuffleResult r = rs::reshuffle_feasibility(t);
  CHECK(r.feasible == false);
  // Four independent samples essentially never agree in their single-arm
  // counts, so the named condition is a marginal mismatch.
  CHECK(r.violated_condition.find("differs") != std::string::npos);
}

TEST_CASE("count table converters and validation") {
  ex::QuadrupleSheet q;
  q.design = md::Design::standard();
  q.rows = {{1, 1, -1, 1}, {1, -1, -1, -1}, {-1, 1, 1, 1}};
  const CountTable t = CountTable::from_quadruples(q);
  CHECK(t.total() == 3);
  // Row (1,1,-1,1): context (x,y) sees (a=+1, b=-1).
  CHECK(t.tables[0][0][1] == 2);
  CHECK(t.tables[0][1][0] == 1);
  // Context (x',y') sees (a'=+1, b'=+1) twice and (-1,-1) once.
  CHECK(t.tables[3][0][0] == 2);
  CHECK(t.tables[3][1][1] == 1);

  CountTable unequal = t;
  ++unequal.tables[2][0][0];
  CHECK_THROWS_AS(unequal.validate(), bell::input_error);
  CountTable negative = t;
  negative.tables[1][0][0] = -1;
  negative.tables[1][0][1] += 1;
  CHECK_THROWS_AS(negative.validate(), bell::input_error);
  CHECK_THROWS_AS((void)rs::reshuffle_feasibility(unequal), bell::input_error);
}

TEST_CASE("all-zero tables are trivially feasible with an empty witness") {
  CountTable t;
  const rs::ReshuffleResult r = rs::reshuffle_feasibility(t);
  CHECK(r.feasible);
  for (long c : r.witness) CHECK(c == 0);
}
