#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bell/rng.hpp"
#include "bell/stats.hpp"

namespace bell::purity {

// One recorded outcome series, e.g. the +1/-1 stream of a single arm.
struct RunSeries {
  std::string run_id;
  std::vector<int> outcomes;
};

struct PurityConfig {
  std::size_t block_length = 3;
  std::size_t resamples = 8;
  double alpha = 0.01;
  double subset_fraction = 0.2;
  std::size_t min_subset = 500;
};

struct TestResult {
  std::string name;
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

struct PurityReport {
  std::vector<TestResult> tests;
  double alpha = 0.0;
  std::size_t bonferroni_k = 0;
  bool pure = true;
  std::size_t resamples = 0;
  std::size_t subset_size_min = 0;
};

// Tests whether the runs look like draws from one fixed distribution:
// symbol and block frequencies across runs, plus random scatter subsets
// (composition) and contiguous segments (arrangement) against their
// complements within each run. Rejections are Bonferroni-corrected; raw
// p-values stay uncorrected in the results.
PurityReport purity_test(const std::vector<RunSeries>& runs,
                         const PurityConfig& config, RngStream& rng);

struct FineStructureConfig {
  std::size_t max_lag = 50;
  double alpha = 0.01;
};

struct FineStructureReport {
  bool degenerate = false;
  std::string note;

  std::vector<double> autocorrelation;  // lags 1..L
  std::vector<double> band;             // reject lag k when |r_k| > band[k-1]
  std::vector<std::size_t> flagged_lags;

  std::vector<double> periodogram;   // harmonic ordinates, Nyquist excluded
  std::vector<double> frequencies;   // cycles per step, matching ordinates
  double periodogram_threshold = 0.0;
  std::vector<double> flagged_frequencies;

  stats::RunsTestResult runs;
  bool runs_reject = false;

  stats::KsResult waiting_time_ks;
  bool waiting_reject = false;

  bool structure_found = false;
};

// Looks inside one run for serial structure: autocorrelation out of band,
// periodogram peaks, too few or too many sign runs, and drift in the
// waiting times between +1 outcomes. Each family is calibrated to reject
// a structureless series with probability about alpha.
FineStructureReport fine_structure(const RunSeries& series,
                                   const FineStructureConfig& config,
                                   RngStream& rng);

struct GuardResult {
  stats::ChiSquareResult chi;
  bool homogeneous = true;
};

// k-sample symbol chi-square across the given runs.
GuardResult homogeneity_guard(const std::vector<RunSeries>& runs,
                              double alpha);

}  // namespace bell::purity
