#include <cmath>
#include <vector>

#include "bell/errors.hpp"
#include "bell/rng.hpp"
#include "bell/stats.hpp"
#include "doctest.h"

namespace st = bell::stats;

// Reference values below were computed independently with mpmath at 50
// digits and truncated; tolerances are far above double rounding.

TEST_CASE("chi-square survival function matches reference values") {
  CHECK(st::chi_square_sf(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(st::chi_square_sf(3.841458820694124, 1.0) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(st::chi_square_sf(5.991464547107979, 2.0) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(st::chi_square_sf(16.918977604620448, 9.0) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(st::chi_square_sf(2.0, 2.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(st::chi_square_sf(100.0, 3.0) < 1e-20);
}

TEST_CASE("normal tail and quantile are mutually consistent") {
  CHECK(st::normal_sf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(st::normal_sf(1.959963984540054) ==
        doctest::Approx(0.025).epsilon(1e-8));
  CHECK(st::normal_sf(-1.0) + st::normal_sf(1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st::normal_two_sided_p(1.959963984540054) ==
        doctest::Approx(0.05).epsilon(1e-8));

  CHECK(st::normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-8));
  CHECK(st::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  for (double p : {0.001, 0.1, 0.37, 0.8, 0.999}) {
    double z = st::normal_quantile(p);
    CHECK(1.0 - st::normal_sf(z) == doctest::Approx(p).epsilon(1e-8));
  }
}

TEST_CASE("Kolmogorov tail matches reference values") {
  // K(1.0) and K(1.36) from the classic asymptotic series.
  CHECK(st::ks_sf(1.0) == doctest::Approx(0.26999967).epsilon(1e-6));
  CHECK(st::ks_sf(1.3581015157406195) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(st::ks_sf(0.05) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(st::ks_sf(3.0) < 1e-7);
}

TEST_CASE("mean_se on a known sample") {
  st::MeanSe m = st::mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == doctest::Approx(2.5));
  // sample sd = sqrt(5/3), se = sd / 2
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(m.n == 4);
}

TEST_CASE("wilson interval brackets the point estimate and shrinks") {
  auto w = st::wilson_interval(50, 100, 0.05);
  CHECK(w.lo < 0.5);
  CHECK(w.hi > 0.5);
  CHECK(w.lo == doctest::Approx(0.40383).epsilon(1e-3));
  CHECK(w.hi == doctest::Approx(0.59617).epsilon(1e-3));
  auto tight = st::wilson_interval(5000, 10000, 0.05);
  CHECK(tight.hi - tight.lo < w.hi - w.lo);
  auto zero = st::wilson_interval(0, 100, 0.05);
  CHECK(zero.lo == doctest::Approx(0.0));
  CHECK(zero.hi > 0.0);
}

TEST_CASE("chi-square homogeneity: identical rows give statistic 0") {
  st::ChiSquareResult r =
      st::chi_square_homogeneity({{10, 20, 30}, {10, 20, 30}});
  CHECK(r.statistic == doctest::Approx(0.0));
  CHECK(r.dof == doctest::Approx(2.0));
  CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("chi-square homogeneity: hand-computed 2x2 table") {
  // Rows (30,10) and (10,30): chi2 = sum (o-e)^2/e with e = 20 -> 20.
  st::ChiSquareResult r = st::chi_square_homogeneity({{30, 10}, {10, 30}});
  CHECK(r.statistic == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(r.dof == doctest::Approx(1.0));
  CHECK(r.p_value == doctest::Approx(st::chi_square_sf(20.0, 1.0)));
  double v = st::cramers_v(r, {{30, 10}, {10, 30}});
  CHECK(v == doctest::Approx(0.5).epsilon(1e-12));  // sqrt(20/80)
}

TEST_CASE("chi-square homogeneity drops empty columns") {
  st::ChiSquareResult with_empty =
      st::chi_square_homogeneity({{30, 10, 0}, {10, 30, 0}});
  CHECK(with_empty.statistic == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(with_empty.dof == doctest::Approx(1.0));
}

TEST_CASE("runs test: alternating sequence has maximal runs, tiny p") {
  std::vector<int> alt;
  for (int i = 0; i < 200; ++i) alt.push_back(i % 2 == 0 ? 1 : -1);
  st::RunsTestResult r = st::runs_test(alt);
  CHECK(r.runs == 200);
  CHECK(r.p_value < 1e-10);
  CHECK(r.z > 0.0);
}

TEST_CASE("runs test: blocked sequence has too few runs, tiny p") {
  std::vector<int> blocked(100, 1);
  blocked.insert(blocked.end(), 100, -1);
  st::RunsTestResult r = st::runs_test(blocked);
  CHECK(r.runs == 2);
  CHECK(r.p_value < 1e-10);
  CHECK(r.z < 0.0);
}

TEST_CASE("runs test: iid signs are typically unremarkable") {
  bell::RngStream g(11);
  int rejects = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> xs;
    for (int i = 0; i < 500; ++i) xs.push_back(g.next_sign());
    if (st::runs_test(xs).p_value < 0.01) ++rejects;
  }
  CHECK(rejects <= 8);
}

TEST_CASE("two-sample KS separates shifted samples, accepts equal ones") {
  bell::RngStream g(12);
  std::vector<double> x, y, z;
  for (int i = 0; i < 2000; ++i) {
    x.push_back(g.next_unit());
    y.push_back(g.next_unit() + 0.2);
    z.push_back(g.next_unit());
  }
  CHECK(st::ks_two_sample(x, y).p_value < 1e-6);
  CHECK(st::ks_two_sample(x, z).p_value > 0.01);
  // Statistic for the shifted pair is near the shift size.
  CHECK(st::ks_two_sample(x, y).statistic ==
        doctest::Approx(0.2).epsilon(0.15));
}

TEST_CASE("degenerate inputs raise input errors") {
  CHECK_THROWS_AS((void)st::mean_se({}), bell::input_error);
  CHECK_THROWS_AS((void)st::wilson_interval(5, 0, 0.05), bell::input_error);
  CHECK_THROWS_AS((void)st::wilson_interval(5, 4, 0.05), bell::input_error);
  CHECK_THROWS_AS((void)st::chi_square_homogeneity({}), bell::input_error);
  CHECK_THROWS_AS((void)st::chi_square_homogeneity({{1, 2}}),
                  bell::input_error);
  CHECK_THROWS_AS((void)st::chi_square_homogeneity({{1, 2}, {1}}),
                  bell::input_error);
  CHECK_THROWS_AS((void)st::runs_test({1, 1, 1}), bell::stat_error);
  CHECK_THROWS_AS((void)st::ks_two_sample({}, {1.0}), bell::input_error);
  CHECK_THROWS_AS((void)st::normal_quantile(0.0), bell::input_error);
  CHECK_THROWS_AS((void)st::normal_quantile(1.0), bell::input_error);
}
