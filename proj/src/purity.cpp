#include "bell/purity.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <set>

#include <unsupported/Eigen/FFT>

#include "bell/errors.hpp"

namespace bell::purity {

namespace {

constexpr std::size_t kMaxAlphabet = 8;
constexpr std::size_t kMaxBlockCategories = 4096;
constexpr std::size_t kMinWaitingTimes = 20;

std::vector<int> pooled_alphabet(const std::vector<RunSeries>& runs) {
  std::set<int> values;
  for (const RunSeries& r : runs)
    for (int v : r.outcomes) values.insert(v);
  if (values.size() > kMaxAlphabet)
    throw input_error("outcome alphabet too large");
  return {values.begin(), values.end()};
}

std::size_t symbol_of(const std::vector<int>& alphabet, int v) {
  const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), v);
  return static_cast<std::size_t>(it - alphabet.begin());
}

std::vector<std::size_t> symbol_counts(const std::vector<int>& alphabet,
                                       const std::vector<int>& xs,
                                       std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> counts(alphabet.size(), 0);
  for (std::size_t i = lo; i < hi; ++i)
    ++counts[symbol_of(alphabet, xs[i])];
  return counts;
}

TestResult chi_test(std::string name,
                    const std::vector<std::vector<std::size_t>>& table) {
  const stats::ChiSquareResult r = stats::chi_square_homogeneity(table);
  TestResult t;
  t.name = std::move(name);
  t.statistic = r.statistic;
  t.dof = r.dof;
  t.p_value = r.p_value;
  return t;
}

std::vector<std::size_t> block_counts(const std::vector<int>& alphabet,
                                      const std::vector<int>& xs,
                                      std::size_t m,
                                      std::size_t n_categories) {
  std::vector<std::size_t> counts(n_categories, 0);
  const std::size_t n_blocks = xs.size() / m;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::size_t code = 0;
    for (std::size_t j = 0; j < m; ++j)
      code = code * alphabet.size() + symbol_of(alphabet, xs[b * m + j]);
    ++counts[code];
  }
  return counts;
}

}  // namespace

PurityReport purity_test(const std::vector<RunSeries>& runs,
                         const PurityConfig& config, RngStream& rng) {
  if (runs.empty()) throw input_error("no runs given");
  if (config.block_length == 0 || config.block_length > 8)
    throw config_error("block_length must be in 1..8");
  if (config.resamples == 0) throw config_error("resamples must be positive");
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw config_error("alpha outside (0,1)");
  if (!(config.subset_fraction > 0.0 && config.subset_fraction < 1.0))
    throw config_error("subset_fraction outside (0,1)");

  const std::size_t required =
      std::max(100 * config.block_length, 2 * config.min_subset);
  for (const RunSeries& r : runs)
    if (r.outcomes.size() < required)
      throw stat_error("run '" + r.run_id + "' too short", required);

  const std::vector<int> alphabet = pooled_alphabet(runs);
  const std::size_t c = alphabet.size();
  double cat_f = 1.0;
  for (std::size_t j = 0; j < config.block_length; ++j)
    cat_f *= static_cast<double>(c);
  if (cat_f > static_cast<double>(kMaxBlockCategories))
    throw input_error("too many block categories (shrink block_length)");
  const std::size_t n_cat = static_cast<std::size_t>(cat_f);

  PurityReport report;
  report.alpha = config.alpha;
  report.resamples = config.resamples;

  if (runs.size() >= 2) {
    std::vector<std::vector<std::size_t>> sym_table, blk_table;
    for (const RunSeries& r : runs) {
      sym_table.push_back(
          symbol_counts(alphabet, r.outcomes, 0, r.outcomes.size()));
      blk_table.push_back(
          block_counts(alphabet, r.outcomes, config.block_length, n_cat));
    }
    report.tests.push_back(chi_test("symbols:across-runs", sym_table));
    report.tests.push_back(chi_test(
        "blocks" + std::to_string(config.block_length) + ":across-runs",
        blk_table));
  }

  std::size_t subset_min = 0;
  for (const RunSeries& run : runs) {
    const std::size_t n = run.outcomes.size();
    std::size_t s = std::max(
        config.min_subset,
        static_cast<std::size_t>(config.subset_fraction *
                                 static_cast<double>(n)));
    s = std::min(s, n / 2);
    subset_min = subset_min == 0 ? s : std::min(subset_min, s);

    std::vector<std::size_t> idx(n);
    for (std::size_t j = 0; j < config.resamples; ++j) {
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < s; ++i) {
        const std::size_t k =
            i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(idx[i], idx[k]);
      }
      std::vector<std::size_t> in(c, 0);
      for (std::size_t i = 0; i < s; ++i)
        ++in[symbol_of(alphabet, run.outcomes[idx[i]])];
      std::vector<std::size_t> all =
          symbol_counts(alphabet, run.outcomes, 0, n);
      std::vector<std::size_t> out(c, 0);
      for (std::size_t k = 0; k < c; ++k) out[k] = all[k] - in[k];
      report.tests.push_back(chi_test(
          "scatter:" + run.run_id + ":" + std::to_string(j), {in, out}));
    }

    for (std::size_t j = 0; j < config.resamples; ++j) {
      const std::size_t start =
          static_cast<std::size_t>(rng.next_below(n - s + 1));
      std::vector<std::size_t> in =
          symbol_counts(alphabet, run.outcomes, start, start + s);
      std::vector<std::size_t> all =
          symbol_counts(alphabet, run.outcomes, 0, n);
      std::vector<std::size_t> out(c, 0);
      for (std::size_t k = 0; k < c; ++k) out[k] = all[k] - in[k];
      report.tests.push_back(chi_test(
          "segment:" + run.run_id + ":" + std::to_string(j), {in, out}));
    }
  }
  report.subset_size_min = subset_min;

  report.bonferroni_k = report.tests.size();
  const double cut =
      config.alpha / static_cast<double>(std::max<std::size_t>(
                         1, report.bonferroni_k));
  for (TestResult& t : report.tests) {
    t.reject = t.p_value < cut;
    if (t.reject) report.pure = false;
  }
  return report;
}

FineStructureReport fine_structure(const RunSeries& series,
                                   const FineStructureConfig& config,
                                   RngStream& rng) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw config_error("alpha outside (0,1)");
  if (config.max_lag == 0) throw config_error("max_lag must be positive");
  const std::size_t n = series.outcomes.size();
  const std::size_t required = std::max<std::size_t>(4 * config.max_lag, 64);
  if (n < required)
    throw stat_error("series too short for lag analysis", required);

  FineStructureReport report;
  const int first = series.outcomes.front();
  if (std::all_of(series.outcomes.begin(), series.outcomes.end(),
                  [first](int v) { return v == first; })) {
    report.degenerate = true;
    report.note = "constant series; nothing to test";
    return report;
  }

  std::vector<double> x(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += series.outcomes[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = series.outcomes[i] - mean;
    var += x[i] * x[i];
  }
  var /= static_cast<double>(n);

  // Lag-k products averaged over their own count, so a strictly periodic
  // series reaches +-1 at every lag instead of shrinking with k.
  const std::size_t max_lag = std::min(config.max_lag, n / 4);
  const double z_lag = stats::normal_quantile(
      1.0 - config.alpha / (2.0 * static_cast<double>(max_lag)));
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += x[t] * x[t + k];
    num /= static_cast<double>(n - k);
    const double r = num / var;
    report.autocorrelation.push_back(r);
    const double b = z_lag * std::sqrt(static_cast<double>(n)) /
                     static_cast<double>(n - k);
    report.band.push_back(b);
    if (std::fabs(r) > b) report.flagged_lags.push_back(k);
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  const std::size_t n_freq = (n - 1) / 2;  // harmonics 1..n_freq, no Nyquist
  report.periodogram_threshold =
      -std::log(config.alpha / static_cast<double>(n_freq));
  for (std::size_t j = 1; j <= n_freq; ++j) {
    const double ordinate =
        std::norm(spec[j]) / (static_cast<double>(n) * var);
    const double freq = static_cast<double>(j) / static_cast<double>(n);
    report.periodogram.push_back(ordinate);
    report.frequencies.push_back(freq);
    if (ordinate > report.periodogram_threshold)
      report.flagged_frequencies.push_back(freq);
  }

  // Runs and waiting-time families need a two-symbol reduction; split at
  // the mean when the alphabet is bigger than {lo, hi}.
  std::vector<int> signs(n);
  for (std::size_t i = 0; i < n; ++i) signs[i] = x[i] >= 0.0 ? 1 : -1;
  report.runs = stats::runs_test(signs);
  report.runs_reject = report.runs.p_value < config.alpha;

  std::vector<double> waits;
  std::ptrdiff_t last = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (signs[i] == 1) {
      if (last >= 0)
        waits.push_back(static_cast<double>(static_cast<std::ptrdiff_t>(i) -
                                            last));
      last = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (waits.size() >= kMinWaitingTimes) {
    const std::size_t half = waits.size() / 2;
    std::vector<double> w1(waits.begin(), waits.begin() + half);
    std::vector<double> w2(waits.begin() + half, waits.end());
    // Integer waits tie heavily, which starves the asymptotic tail; a
    // sub-unit jitter breaks ties without reordering distinct values.
    for (double& w : w1) w += rng.next_unit();
    for (double& w : w2) w += rng.next_unit();
    report.waiting_time_ks = stats::ks_two_sample(std::move(w1), std::move(w2));
    report.waiting_reject = report.waiting_time_ks.p_value < config.alpha;
  }

  report.structure_found = !report.flagged_lags.empty() ||
                           !report.flagged_frequencies.empty() ||
                           report.runs_reject || report.waiting_reject;
  return report;
}

GuardResult homogeneity_guard(const std::vector<RunSeries>& runs,
                              double alpha) {
  if (runs.size() < 2) throw input_error("guard needs at least two runs");
  if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha outside (0,1)");
  const std::vector<int> alphabet = pooled_alphabet(runs);
  std::vector<std::vector<std::size_t>> table;
  for (const RunSeries& r : runs)
    table.push_back(symbol_counts(alphabet, r.outcomes, 0, r.outcomes.size()));
  GuardResult g;
  g.chi = stats::chi_square_homogeneity(table);
  g.homogeneous = g.chi.p_value >= alpha;
  return g;
}

}  // namespace bell::purity
