#pragma once

#include <array>
#include <string>

#include "bell/experiment.hpp"

namespace bell::reshuffle {

// Outcome index 0 -> +1, 1 -> -1.
using CountMatrix = std::array<std::array<long, 2>, 2>;

// Four pair-count tables in context order (x,y), (x,y'), (x',y), (x',y').
struct CountTable {
  std::array<CountMatrix, 4> tables{};

  long total() const;
  // Entries nonnegative and all four totals equal, else input_error.
  void validate() const;

  static CountTable from_pair_sheets(
      const std::array<experiment::PairSheet, 4>& sheets);
  static CountTable from_quadruples(const experiment::QuadrupleSheet& sheet);
};

struct ReshuffleResult {
  bool feasible = false;
  // Quadruple counts indexed a*8 + a'*4 + b*2 + b' (bit 0 -> +1).
  std::array<long, 16> witness{};
  std::string violated_condition;
  // Diagnostic: max over the count inequalities of |sum| - 2N. Positive
  // means violated; more negative means more slack.
  long max_count_excess = 0;
};

// Decides whether one set of quadruple rows can reproduce all four tables
// as its pair margins, and builds such a set when possible. Infeasibility
// is always pinned to a named marginal or count-inequality violation.
ReshuffleResult reshuffle_feasibility(const CountTable& counts);

}  // namespace bell::reshuffle
