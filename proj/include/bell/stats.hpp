#pragma once

#include <cstddef>
#include <vector>

namespace bell::stats {

// Upper-tail probabilities and quantiles used by the hypothesis tests.
double chi_square_sf(double x, double dof);
double normal_sf(double z);                 // P(Z > z)
double normal_two_sided_p(double z);        // 2 * P(Z > |z|)
double normal_quantile(double p);           // inverse CDF, 0 < p < 1
double ks_sf(double lambda);                // asymptotic Kolmogorov tail

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
MeanSe mean_se(const std::vector<double>& xs);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
};
WilsonInterval wilson_interval(std::size_t successes, std::size_t n,
                               double alpha);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

// k-sample homogeneity test on a k x c contingency table of counts.
// Columns whose pooled count is zero are dropped from the statistic and
// the degrees of freedom.
ChiSquareResult chi_square_homogeneity(
    const std::vector<std::vector<std::size_t>>& table);

// Cramer's V effect size for the same table.
double cramers_v(const ChiSquareResult& r,
                 const std::vector<std::vector<std::size_t>>& table);

struct RunsTestResult {
  std::size_t runs = 0;
  double z = 0.0;
  double p_value = 1.0;
};
// Wald-Wolfowitz runs test on a +1/-1 sequence.
RunsTestResult runs_test(const std::vector<int>& xs);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
// Two-sample Kolmogorov-Smirnov with the asymptotic tail. Ties are the
// caller's concern (jitter discrete data first).
KsResult ks_two_sample(std::vector<double> x, std::vector<double> y);

}  // namespace bell::stats
