#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bell/models.hpp"
#include "bell/rng.hpp"
#include "bell/stats.hpp"

namespace bell::experiment {

// Outcomes recorded under one fixed setting pair, in trial order.
struct PairSheet {
  models::SettingPair pair;
  std::vector<std::int8_t> a;
  std::vector<std::int8_t> b;

  std::size_t n() const { return a.size(); }
};

// Four sheets in context order (x,y), (x,y'), (x',y), (x',y').
struct PairExperiment {
  models::Design design;
  std::array<PairSheet, 4> sheets;
};

// One row per source emission: all four counterfactual outcomes (a, a', b, b').
struct QuadrupleSheet {
  models::Design design;
  std::vector<std::array<std::int8_t, 4>> rows;

  std::size_t n() const { return rows.size(); }
};

// Runs n_per_pair trials under each setting pair. Settings are chosen by
// fair coin per trial and routed to sheets in trial order; surplus trials
// for an already-full sheet are dropped. Results do not depend on workers.
PairExperiment run_pair_experiments(const models::ModelSpec& model,
                                    const models::Design& design,
                                    std::size_t n_per_pair,
                                    std::uint64_t seed, int workers = 1);

QuadrupleSheet run_counterfactual_experiment(const models::ModelSpec& model,
                                             const models::Design& design,
                                             std::size_t n_rows,
                                             std::uint64_t seed,
                                             int workers = 1);

struct PairEstimate {
  double e = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

struct ChshReport {
  std::array<PairEstimate, 4> pairs;
  double s = 0.0;
  double se = 0.0;
  bool violates_classical_bound = false;
  bool within_tsirelson = true;
};

// S = E(x,y) - E(x,y') + E(x',y) + E(x',y').
ChshReport chsh_from_pairs(const PairExperiment& experiment);

struct QuadrupleChsh {
  ChshReport report;
  double min_row_s = 0.0;
  double max_row_s = 0.0;
};

QuadrupleChsh chsh_from_quadruples(const QuadrupleSheet& sheet);

struct ViolationFrequency {
  double fraction = 0.0;
  stats::WilsonInterval ci;
  std::size_t violations = 0;
  std::size_t replications = 0;
};

// Fraction of independent replications whose estimate satisfies |S| > 2.
ViolationFrequency violation_frequency(const models::ModelSpec& model,
                                       const models::Design& design,
                                       std::size_t n_per_pair,
                                       std::size_t replications, double alpha,
                                       std::uint64_t seed, int workers = 1);

struct EqualityCheck {
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool consistent = true;
};

struct CouplingReport {
  std::vector<EqualityCheck> checks;
  std::size_t failures = 0;
  bool pass = true;
  double alpha = 0.0;
  std::string annotation;
};

// Tests whether the recorded sheets are consistent with a single model:
// per-sheet marginals and correlations against model values (Monte Carlo
// fallback when no closed form is available), plus cross-sheet equality of
// the marginal that shares a setting. Bonferroni-corrected at alpha.
CouplingReport coupling_check(const models::ModelSpec& model,
                              const PairExperiment& experiment, double alpha,
                              std::size_t mc_fallback_n = 200000,
                              std::uint64_t mc_seed = 12345);

}  // namespace bell::experiment
