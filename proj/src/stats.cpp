#include "bell/stats.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>

#include "bell/errors.hpp"

namespace bell::stats {

double chi_square_sf(double x, double dof) {
  if (dof <= 0.0) return 1.0;
  if (x <= 0.0) return 1.0;
  Eigen::ArrayXd a(1), b(1);
  a(0) = 0.5 * dof;
  b(0) = 0.5 * x;
  return Eigen::igammac(a, b)(0);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double normal_two_sided_p(double z) {
  return std::min(1.0, 2.0 * normal_sf(std::fabs(z)));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw input_error("quantile needs 0 < p < 1");
  // Acklam's rational approximation, |relative error| < 1.2e-9.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  return x;
}

double ks_sf(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.n = xs.size();
  if (out.n == 0) throw input_error("mean needs a non-empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  const double var = ss / static_cast<double>(out.n - 1);
  out.se = std::sqrt(var / static_cast<double>(out.n));
  return out;
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t n,
                               double alpha) {
  if (n == 0) throw input_error("interval needs n >= 1");
  if (successes > n) throw input_error("successes exceed trials");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double center = (phat + z * z / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

ChiSquareResult chi_square_homogeneity(
    const std::vector<std::vector<std::size_t>>& table) {
  const std::size_t k = table.size();
  if (k < 2) throw input_error("homogeneity test needs >= 2 samples");
  const std::size_t c = table[0].size();
  for (const auto& row : table)
    if (row.size() != c) throw input_error("ragged contingency table");

  std::vector<double> row_tot(k, 0.0), col_tot(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double v = static_cast<double>(table[i][j]);
      row_tot[i] += v;
      col_tot[j] += v;
      total += v;
    }
  for (std::size_t i = 0; i < k; ++i)
    if (row_tot[i] == 0.0) throw input_error("empty sample in contingency table");

  std::size_t used_cols = 0;
  double stat = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (col_tot[j] == 0.0) continue;
    ++used_cols;
    for (std::size_t i = 0; i < k; ++i) {
      const double expect = row_tot[i] * col_tot[j] / total;
      const double diff = static_cast<double>(table[i][j]) - expect;
      stat += diff * diff / expect;
    }
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.dof = static_cast<double>((k - 1) * (used_cols > 0 ? used_cols - 1 : 0));
  r.p_value = r.dof > 0 ? chi_square_sf(stat, r.dof) : 1.0;
  return r;
}

double cramers_v(const ChiSquareResult& r,
                 const std::vector<std::vector<std::size_t>>& table) {
  if (r.dof <= 0.0) return 0.0;
  double total = 0.0;
  std::size_t used_cols = 0;
  std::vector<double> col_tot(table[0].size(), 0.0);
  for (const auto& row : table)
    for (std::size_t j = 0; j < row.size(); ++j) {
      total += static_cast<double>(row[j]);
      col_tot[j] += static_cast<double>(row[j]);
    }
  for (double ct : col_tot)
    if (ct > 0.0) ++used_cols;
  const std::size_t k = table.size();
  const std::size_t m = std::min(k - 1, used_cols - 1);
  if (m == 0 || total == 0.0) return 0.0;
  return std::sqrt(r.statistic / (total * static_cast<double>(m)));
}

RunsTestResult runs_test(const std::vector<int>& xs) {
  RunsTestResult out;
  const std::size_t n = xs.size();
  if (n < 2) throw stat_error("runs test needs a longer sequence", 2);
  std::size_t npos = 0;
  for (int x : xs)
    if (x > 0) ++npos;
  const std::size_t nneg = n - npos;
  std::size_t runs = 1;
  for (std::size_t i = 1; i < n; ++i)
    if ((xs[i] > 0) != (xs[i - 1] > 0)) ++runs;
  out.runs = runs;
  if (npos == 0 || nneg == 0)
    throw stat_error("runs test needs both symbols present", 2);
  const double np = static_cast<double>(npos), nm = static_cast<double>(nneg);
  const double nn = np + nm;
  const double mu = 2.0 * np * nm / nn + 1.0;
  const double var = 2.0 * np * nm * (2.0 * np * nm - nn) / (nn * nn * (nn - 1.0));
  if (var <= 0.0) {
    out.z = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.z = (static_cast<double>(runs) - mu) / std::sqrt(var);
  out.p_value = normal_two_sided_p(out.z);
  return out;
}

KsResult ks_two_sample(std::vector<double> x, std::vector<double> y) {
  KsResult out;
  const std::size_t n1 = x.size(), n2 = y.size();
  if (n1 == 0 || n2 == 0)
    throw input_error("KS test needs two non-empty samples");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n1 && j < n2) {
    const double xi = x[i], yj = y[j];
    if (xi <= yj) ++i;
    if (yj <= xi) ++j;
    const double f1 = static_cast<double>(i) / static_cast<double>(n1);
    const double f2 = static_cast<double>(j) / static_cast<double>(n2);
    d = std::max(d, std::fabs(f1 - f2));
  }
  out.statistic = d;
  const double ne = static_cast<double>(n1) * static_cast<double>(n2) /
                    static_cast<double>(n1 + n2);
  const double sq = std::sqrt(ne);
  out.p_value = ks_sf((sq + 0.12 + 0.11 / sq) * d);
  return out;
}

}  // namespace bell::stats
