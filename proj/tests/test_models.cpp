#include <array>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "bell/errors.hpp"
#include "bell/models.hpp"
#include "bell/rng.hpp"
#include "doctest.h"

namespace md = bell::models;
using md::Arm;
using md::Design;
using md::ModelSpec;
using md::SettingPair;

namespace {

constexpr double kPi = 3.14159265358979323846;

double mc_expectation(const ModelSpec& m, const SettingPair& p, int n,
                      std::uint64_t seed) {
  bell::RngStream root(seed);
  long sum = 0;
  for (int i = 0; i < n; ++i) {
    bell::RngStream s = root.substream(static_cast<std::uint64_t>(i));
    const md::TrialOutcome t = m.sample_trial(p, s);
    sum += t.a * t.b;
  }
  return static_cast<double>(sum) / n;
}

}  // namespace

TEST_CASE("design helpers expose the context order and the standard angles") {
  const Design d{0.1, 0.2, 0.3, 0.4};
  const auto pairs = d.all_pairs();
  CHECK(pairs[0].x == 0);
  CHECK(pairs[0].y == 0);
  CHECK(pairs[1].x == 0);
  CHECK(pairs[1].y == 1);
  CHECK(pairs[2].x == 1);
  CHECK(pairs[2].y == 0);
  CHECK(pairs[3].x == 1);
  CHECK(pairs[3].y == 1);
  CHECK(pairs[1].theta_x == doctest::Approx(0.1));
  CHECK(pairs[1].theta_y == doctest::Approx(0.4));
  const Design s = Design::standard();
  CHECK(s.a == doctest::Approx(0.0));
  CHECK(s.a_prime == doctest::Approx(kPi / 2));
  CHECK(s.b == doctest::Approx(kPi / 4));
  CHECK(s.b_prime == doctest::Approx(3 * kPi / 4));
}

TEST_CASE("sign kernel is deterministic with sign(0) counted as +1") {
  // cos(theta - lambda) == 0 at theta - lambda = pi/2: outcome +1.
  CHECK(md::lrhvm_sign_outcome(0.0, kPi / 2, Arm::A) == 1);
  CHECK(md::lrhvm_sign_outcome(0.0, 0.0, Arm::A) == 1);
  CHECK(md::lrhvm_sign_outcome(0.0, kPi, Arm::A) == -1);
  // Arm B mirrors arm A: perfectly anticorrelated at equal angles.
  for (double lam : {0.0, 0.4, 2.0, 5.1}) {
    for (double th : {0.0, 1.0, 2.5}) {
      CHECK(md::lrhvm_sign_outcome(lam, th, Arm::B) ==
            -md::lrhvm_sign_outcome(lam, th, Arm::A));
    }
  }
}

TEST_CASE("sawtooth closed form: values, symmetry, and period") {
  CHECK(md::lrhvm_sawtooth_expectation(0.0) == doctest::Approx(-1.0));
  CHECK(md::lrhvm_sawtooth_expectation(kPi) == doctest::Approx(1.0));
  CHECK(md::lrhvm_sawtooth_expectation(kPi / 2) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(md::lrhvm_sawtooth_expectation(kPi / 4) == doctest::Approx(-0.5));
  for (double t : {0.3, 1.1, 2.9}) {
    CHECK(md::lrhvm_sawtooth_expectation(t) ==
          doctest::Approx(md::lrhvm_sawtooth_expectation(-t)));
    CHECK(md::lrhvm_sawtooth_expectation(t) ==
          doctest::Approx(md::lrhvm_sawtooth_expectation(t + 2 * kPi)));
  }
}

TEST_CASE("smooth-response closed form equals -cos(2 delta)/2") {
  for (double t : {0.0, 0.2, kPi / 4, 1.7, 3.0}) {
    CHECK(md::shvm_reference_expectation(t) ==
          doctest::Approx(-0.5 * std::cos(2.0 * t)).epsilon(1e-12));
  }
  CHECK(md::shvm_plus_probability(0.3, 0.3, Arm::A) ==
        doctest::Approx(1.0));  // aligned analyzer: Malus cos^2(0)
  CHECK(md::shvm_plus_probability(0.3, 0.3 + kPi / 2, Arm::A) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("reference families report their structure flags") {
  CHECK(ModelSpec::lrhvm_reference().counterfactually_definite());
  CHECK(ModelSpec::lrhvm_reference().traces_hidden_state());
  CHECK(ModelSpec::shvm_reference().counterfactually_definite() == false);
  CHECK(ModelSpec::rot_chvm_reference().traces_hidden_state());
  CHECK(ModelSpec::rot_chvm_reference().counterfactually_definite() == false);
  CHECK(ModelSpec::quantum_singlet().traces_hidden_state() == false);
  CHECK(ModelSpec::quantum_singlet().counterfactually_definite() == false);
  CHECK(md::family_name(ModelSpec::rot_chvm_reference().family()) ==
        doctest::String("rot_chvm"));
}

TEST_CASE("frozen quadruple: lambda pinned at zero on the standard design") {
  // With both hidden angles at 0 the four sign outcomes are forced:
  // a = sign(cos 0) = +1, a' = sign(cos(pi/2)) = sign(0) = +1,
  // b = -sign(cos(pi/4)) = -1, b' = -sign(cos(3pi/4)) = +1.
  auto pinned = ModelSpec::lrhvm_custom(
      "pinned", [](bell::RngStream&) { return std::make_pair(0.0, 0.0); },
      [](int, double theta, double lambda) {
        return md::lrhvm_sign_outcome(lambda, theta, Arm::A);
      },
      [](int, double theta, double lambda) {
        return md::lrhvm_sign_outcome(lambda, theta, Arm::B);
      });
  bell::RngStream g(1);
  const std::array<int, 4> q = pinned.sample_quadruple(Design::standard(), g);
  CHECK(q[0] == 1);
  CHECK(q[1] == 1);
  CHECK(q[2] == -1);
  CHECK(q[3] == 1);
  // Row CHSH combination: ab - ab' + a'b + a'b' = -2.
  CHECK(q[0] * q[2] - q[0] * q[3] + q[1] * q[2] + q[1] * q[3] == -2);
}

TEST_CASE("Monte Carlo matches the analytic curve for every reference") {
  bell::RngStream angle_rng(77);
  const int n = 20000;
  const double tol = 4.0 / std::sqrt(static_cast<double>(n));
  int k = 0;
  for (const ModelSpec& m :
       {ModelSpec::lrhvm_reference(), ModelSpec::shvm_reference(),
        ModelSpec::rot_chvm_reference(), ModelSpec::quantum_singlet()}) {
    for (int rep = 0; rep < 4; ++rep) {
      SettingPair p{0, 0, angle_rng.next_angle(), angle_rng.next_angle()};
      const auto analytic = m.analytic_expectation(p);
      REQUIRE(analytic.has_value());
      const double mc = mc_expectation(m, p, n, 1000 + 17 * k++);
      CHECK(std::abs(mc - *analytic) < tol);
    }
  }
}

TEST_CASE("shared-instrument reference reproduces the cosine exactly") {
  for (double tx : {0.0, 0.3, 1.2}) {
    for (double ty : {0.1, 2.0}) {
      SettingPair p{0, 0, tx, ty};
      const auto e = ModelSpec::rot_chvm_reference().analytic_expectation(p);
      REQUIRE(e.has_value());
      CHECK(*e == doctest::Approx(-std::cos(tx - ty)).epsilon(1e-12));
    }
  }
}

TEST_CASE("single-arm means are centered for the symmetric references") {
  for (const ModelSpec& m :
       {ModelSpec::lrhvm_reference(), ModelSpec::shvm_reference(),
        ModelSpec::rot_chvm_reference(), ModelSpec::quantum_singlet()}) {
    for (int label : {0, 1}) {
      const auto ma = m.analytic_single_arm_mean(Arm::A, label, 0.7);
      const auto mb = m.analytic_single_arm_mean(Arm::B, label, 2.1);
      REQUIRE(ma.has_value());
      REQUIRE(mb.has_value());
      CHECK(*ma == doctest::Approx(0.0));
      CHECK(*mb == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("boundary model: deterministic arms except the primed B coin") {
  const ModelSpec m = ModelSpec::shvm_boundary();
  const Design d = Design::standard();
  // Analytic pattern E = (1, 0, 1, 0) over the context order.
  const auto pairs = d.all_pairs();
  CHECK(*m.analytic_expectation(pairs[0]) == doctest::Approx(1.0));
  CHECK(*m.analytic_expectation(pairs[1]) == doctest::Approx(0.0));
  CHECK(*m.analytic_expectation(pairs[2]) == doctest::Approx(1.0));
  CHECK(*m.analytic_expectation(pairs[3]) == doctest::Approx(0.0));
  // S_true = 1 - 0 + 1 + 0 = 2: exactly on the classical boundary.
  bell::RngStream g(5);
  int coin_sum = 0;
  for (int i = 0; i < 4000; ++i) {
    bell::RngStream s = g.substream(static_cast<std::uint64_t>(i));
    const md::TrialOutcome unprimed = m.sample_trial(pairs[0], s);
    CHECK(unprimed.a == 1);
    CHECK(unprimed.b == 1);
    bell::RngStream s2 = g.substream(static_cast<std::uint64_t>(i) + 100000);
    const md::TrialOutcome primed = m.sample_trial(pairs[1], s2);
    CHECK(primed.a == 1);
    coin_sum += primed.b;
  }
  CHECK(std::abs(coin_sum) < 5 * std::sqrt(4000.0));
}

TEST_CASE("quadruples demand counterfactual definiteness") {
  bell::RngStream g(2);
  CHECK_THROWS_AS((void)ModelSpec::quantum_singlet().sample_quadruple(
                      Design::standard(), g),
                  bell::input_error);
  CHECK_THROWS_AS((void)ModelSpec::shvm_reference().sample_quadruple(
                      Design::standard(), g),
                  bell::input_error);
}

TEST_CASE("quadruple columns agree with pairwise sampling statistics") {
  // E estimated from quadruple columns must track the sawtooth closed form.
  const ModelSpec m = ModelSpec::lrhvm_reference();
  const Design d = Design::standard();
  bell::RngStream root(31);
  const int n = 40000;
  long s01 = 0;
  for (int i = 0; i < n; ++i) {
    bell::RngStream s = root.substream(static_cast<std::uint64_t>(i));
    const auto q = m.sample_quadruple(d, s);
    s01 += q[0] * q[2];
  }
  const double e = static_cast<double>(s01) / n;
  CHECK(std::abs(e - md::lrhvm_sawtooth_expectation(d.b - d.a)) <
        4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("hidden-state traces carry the declared coordinates") {
  bell::RngStream g(3);
  const SettingPair p = Design::standard().pair(0, 1);
  const md::TrialOutcome lr =
      ModelSpec::lrhvm_reference().sample_trial(p, g);
  REQUIRE(lr.has_trace);
  CHECK(lr.trace.mu_x.empty());
  CHECK(lr.trace.mu_y.empty());
  CHECK(lr.trace.lambda1 >= 0.0);
  CHECK(lr.trace.lambda1 < 2 * kPi);
  CHECK(lr.trace.lambda2 == doctest::Approx(lr.trace.lambda1));

  const md::TrialOutcome rc =
      ModelSpec::rot_chvm_reference().sample_trial(p, g);
  REQUIRE(rc.has_trace);
  CHECK(rc.trace.mu_x.size() == 2);
  CHECK(rc.trace.mu_y.size() == 3);
  // The third receiver coordinate is the context cosine.
  CHECK(rc.trace.mu_y[2] ==
        doctest::Approx(std::cos(p.theta_x - p.theta_y)).epsilon(1e-12));

  const md::TrialOutcome qs =
      ModelSpec::quantum_singlet().sample_trial(p, g);
  CHECK(qs.has_trace == false);
}

TEST_CASE("independence scan clears the local reference") {
  const auto rep = md::statistical_independence_check(
      ModelSpec::lrhvm_reference(), Design::standard(), 2000, 0.01, 41);
  CHECK(rep.any_setting_dependent == false);
  REQUIRE(!rep.variables.empty());
  for (const auto& v : rep.variables) CHECK(v.setting_dependent == false);
  CHECK(rep.recoverability_checked == false);
}

TEST_CASE("independence scan flags the shared-instrument reference") {
  // Generic angles keep the four context cosines distinct, so the setting
  // pair is perfectly readable off the receiver instrument coordinate.
  const Design generic{0.0, 1.0, 0.3, 0.9};
  const auto rep = md::statistical_independence_check(
      ModelSpec::rot_chvm_reference(), generic, 2000, 0.01, 42);
  CHECK(rep.any_setting_dependent);
  bool mu_y_flagged = false;
  for (const auto& v : rep.variables)
    if (v.variable == "mu_y[2]" && v.setting_dependent) mu_y_flagged = true;
  CHECK(mu_y_flagged);
  CHECK(rep.recoverability_checked);
  CHECK(rep.recoverability_accuracy == doctest::Approx(1.0));
}

TEST_CASE("independence scan needs traces and enough samples") {
  CHECK_THROWS_AS((void)md::statistical_independence_check(
                      ModelSpec::quantum_singlet(), Design::standard(), 2000,
                      0.01, 1),
                  bell::input_error);
  CHECK_THROWS_AS((void)md::statistical_independence_check(
                      ModelSpec::lrhvm_reference(), Design::standard(), 100,
                      0.01, 1),
                  bell::stat_error);
  try {
    (void)md::statistical_independence_check(ModelSpec::lrhvm_reference(),
                                             Design::standard(), 100, 0.01, 1);
  } catch (const bell::stat_error& e) {
    CHECK(e.required_n == 320);
  }
}

TEST_CASE("custom smooth model validates its probabilities") {
  auto bad = ModelSpec::shvm_custom(
      "bad", [](bell::RngStream& r) {
        const double l = r.next_angle();
        return std::make_pair(l, l);
      },
      [](int, double, double) { return 1.5; },
      [](int, double, double) { return 0.5; });
  bell::RngStream g(4);
  CHECK_THROWS_AS((void)bad.sample_trial(Design::standard().pair(0, 0), g),
                  bell::config_error);
}
