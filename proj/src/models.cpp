#include "bell/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "bell/errors.hpp"
#include "bell/quantum.hpp"

namespace bell::models {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

int sign_pm(double v) { return v >= 0.0 ? 1 : -1; }

double fold_angle(double d) {
  d = std::fabs(std::fmod(d, kTwoPi));
  return d > kPi ? kTwoPi - d : d;
}
}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::LRHVM: return "lrhvm";
    case Family::SHVM: return "shvm";
    case Family::CHVM: return "chvm";
    case Family::ROT_CHVM: return "rot_chvm";
    case Family::QUANTUM: return "quantum";
  }
  return "?";
}

SettingPair Design::pair(int x, int y) const {
  if ((x != 0 && x != 1) || (y != 0 && y != 1))
    throw input_error("setting labels must be 0 or 1");
  SettingPair p;
  p.x = x;
  p.y = y;
  p.theta_x = x == 0 ? a : a_prime;
  p.theta_y = y == 0 ? b : b_prime;
  return p;
}

std::array<SettingPair, 4> Design::all_pairs() const {
  return {pair(0, 0), pair(0, 1), pair(1, 0), pair(1, 1)};
}

Design Design::standard() { return Design{0.0, kPi / 2.0, kPi / 4.0, 3.0 * kPi / 4.0}; }

int lrhvm_sign_outcome(double lambda, double theta, Arm arm) {
  const int s = sign_pm(std::cos(theta - lambda));
  return arm == Arm::A ? s : -s;
}

double shvm_plus_probability(double lambda, double theta, Arm arm) {
  const double c = std::cos(theta - lambda);
  return arm == Arm::A ? c * c : 1.0 - c * c;
}

double lrhvm_sawtooth_expectation(double theta_xy) {
  return -1.0 + 2.0 * fold_angle(theta_xy) / kPi;
}

double shvm_reference_expectation(double theta_xy) {
  return -0.5 * std::cos(2.0 * theta_xy);
}

ModelSpec ModelSpec::lrhvm_reference() {
  ModelSpec m;
  m.family_ = Family::LRHVM;
  m.name_ = "lrhvm";
  m.counterfactually_definite_ = true;
  m.traces_ = true;
  m.lambda_ = [](RngStream& rng) {
    const double l = rng.next_angle();
    return std::make_pair(l, l);
  };
  m.det_a_ = [](int, double theta, double lambda) {
    return lrhvm_sign_outcome(lambda, theta, Arm::A);
  };
  m.det_b_ = [](int, double theta, double lambda) {
    return lrhvm_sign_outcome(lambda, theta, Arm::B);
  };
  m.analytic_e_ = [](const SettingPair& p) {
    return std::optional<double>(
        lrhvm_sawtooth_expectation(p.theta_x - p.theta_y));
  };
  m.analytic_mean_ = [](Arm, int, double) { return std::optional<double>(0.0); };
  return m;
}

ModelSpec ModelSpec::shvm_reference() {
  ModelSpec m;
  m.family_ = Family::SHVM;
  m.name_ = "shvm";
  m.traces_ = true;
  m.lambda_ = [](RngStream& rng) {
    const double l = rng.next_angle();
    return std::make_pair(l, l);
  };
  m.prob_a_ = [](int, double theta, double lambda) {
    return shvm_plus_probability(lambda, theta, Arm::A);
  };
  m.prob_b_ = [](int, double theta, double lambda) {
    return shvm_plus_probability(lambda, theta, Arm::B);
  };
  m.analytic_e_ = [](const SettingPair& p) {
    return std::optional<double>(
        shvm_reference_expectation(p.theta_x - p.theta_y));
  };
  m.analytic_mean_ = [](Arm, int, double) { return std::optional<double>(0.0); };
  return m;
}

ModelSpec ModelSpec::rot_chvm_reference() {
  ModelSpec m;
  m.family_ = Family::ROT_CHVM;
  m.name_ = "rot_chvm";
  m.traces_ = true;
  m.lambda_ = [](RngStream& rng) {
    const double l = rng.next_angle();
    return std::make_pair(l, l);
  };
  // Source variables (u, v) are setting-free; the far-side instrument state
  // is a function of them and of the relative rotation only.
  m.mu_ = [](const SettingPair& p, RngStream& rng, std::vector<double>& mu_x,
             std::vector<double>& mu_y) {
    const double u = rng.next_unit();
    const double v = rng.next_unit();
    const double c = std::cos(p.theta_x - p.theta_y);
    mu_x = {u, v};
    mu_y = {u, v, c};
  };
  m.chvm_a_ = [](int, double, double, const std::vector<double>& mu) {
    return sign_pm(mu[0] - 0.5);
  };
  m.chvm_b_ = [](int, double, double, const std::vector<double>& mu) {
    const int a = sign_pm(mu[0] - 0.5);
    return mu[1] < 0.5 * (1.0 + mu[2]) ? -a : a;
  };
  m.analytic_e_ = [](const SettingPair& p) {
    return std::optional<double>(-std::cos(p.theta_x - p.theta_y));
  };
  m.analytic_mean_ = [](Arm, int, double) { return std::optional<double>(0.0); };
  return m;
}

ModelSpec ModelSpec::quantum_singlet() {
  ModelSpec m;
  m.family_ = Family::QUANTUM;
  m.name_ = "quantum";
  m.traces_ = false;
  m.analytic_e_ = [](const SettingPair& p) {
    return std::optional<double>(-std::cos(p.theta_x - p.theta_y));
  };
  m.analytic_mean_ = [](Arm, int, double) { return std::optional<double>(0.0); };
  return m;
}

ModelSpec ModelSpec::shvm_boundary() {
  ModelSpec m;
  m.family_ = Family::SHVM;
  m.name_ = "shvm_boundary";
  m.traces_ = true;
  m.lambda_ = [](RngStream&) { return std::make_pair(0.0, 0.0); };
  m.prob_a_ = [](int, double, double) { return 1.0; };
  m.prob_b_ = [](int label, double, double) { return label == 0 ? 1.0 : 0.5; };
  m.analytic_e_ = [](const SettingPair& p) {
    return std::optional<double>(p.y == 0 ? 1.0 : 0.0);
  };
  m.analytic_mean_ = [](Arm arm, int label, double) {
    if (arm == Arm::B && label == 1) return std::optional<double>(0.0);
    return std::optional<double>(1.0);
  };
  return m;
}

ModelSpec ModelSpec::lrhvm_custom(std::string name, LambdaSampler lambda,
                                  DetOutcome a, DetOutcome b,
                                  AnalyticE analytic, AnalyticMean means) {
  ModelSpec m;
  m.family_ = Family::LRHVM;
  m.name_ = std::move(name);
  m.counterfactually_definite_ = true;
  m.traces_ = true;
  m.lambda_ = std::move(lambda);
  m.det_a_ = std::move(a);
  m.det_b_ = std::move(b);
  m.analytic_e_ = std::move(analytic);
  m.analytic_mean_ = std::move(means);
  return m;
}

ModelSpec ModelSpec::shvm_custom(std::string name, LambdaSampler lambda,
                                 ProbOutcome pa, ProbOutcome pb,
                                 AnalyticE analytic, AnalyticMean means) {
  ModelSpec m;
  m.family_ = Family::SHVM;
  m.name_ = std::move(name);
  m.traces_ = true;
  m.lambda_ = std::move(lambda);
  m.prob_a_ = std::move(pa);
  m.prob_b_ = std::move(pb);
  m.analytic_e_ = std::move(analytic);
  m.analytic_mean_ = std::move(means);
  return m;
}

ModelSpec ModelSpec::chvm_custom(std::string name, LambdaSampler lambda,
                                 MuSampler mu, ChvmOutcome a, ChvmOutcome b,
                                 AnalyticE analytic, AnalyticMean means) {
  ModelSpec m;
  m.family_ = Family::CHVM;
  m.name_ = std::move(name);
  m.traces_ = true;
  m.lambda_ = std::move(lambda);
  m.mu_ = std::move(mu);
  m.chvm_a_ = std::move(a);
  m.chvm_b_ = std::move(b);
  m.analytic_e_ = std::move(analytic);
  m.analytic_mean_ = std::move(means);
  return m;
}

std::optional<double> ModelSpec::analytic_expectation(
    const SettingPair& pair) const {
  if (!analytic_e_) return std::nullopt;
  return analytic_e_(pair);
}

std::optional<double> ModelSpec::analytic_single_arm_mean(Arm arm, int label,
                                                          double theta) const {
  if (!analytic_mean_) return std::nullopt;
  return analytic_mean_(arm, label, theta);
}

TrialOutcome ModelSpec::sample_trial(const SettingPair& pair,
                                     RngStream& rng) const {
  TrialOutcome out;
  switch (family_) {
    case Family::QUANTUM: {
      static const quantum::QuantumState singlet = quantum::singlet_state();
      const quantum::JointProbabilities jp =
          quantum::joint_probabilities(singlet, pair.theta_x, pair.theta_y);
      const double u = rng.next_unit();
      if (u < jp.p[0][0]) {
        out.a = 1;
        out.b = 1;
      } else if (u < jp.p[0][0] + jp.p[0][1]) {
        out.a = 1;
        out.b = -1;
      } else if (u < jp.p[0][0] + jp.p[0][1] + jp.p[1][0]) {
        out.a = -1;
        out.b = 1;
      } else {
        out.a = -1;
        out.b = -1;
      }
      return out;
    }
    case Family::LRHVM: {
      const auto [l1, l2] = lambda_(rng);
      out.a = det_a_(pair.x, pair.theta_x, l1);
      out.b = det_b_(pair.y, pair.theta_y, l2);
      out.has_trace = true;
      out.trace.lambda1 = l1;
      out.trace.lambda2 = l2;
      return out;
    }
    case Family::SHVM: {
      const auto [l1, l2] = lambda_(rng);
      const double pa = prob_a_(pair.x, pair.theta_x, l1);
      const double pb = prob_b_(pair.y, pair.theta_y, l2);
      if (!(pa >= 0.0 && pa <= 1.0) || !(pb >= 0.0 && pb <= 1.0))
        throw config_error("outcome probability outside [0, 1]");
      out.a = rng.next_unit() < pa ? 1 : -1;
      out.b = rng.next_unit() < pb ? 1 : -1;
      out.has_trace = true;
      out.trace.lambda1 = l1;
      out.trace.lambda2 = l2;
      return out;
    }
    case Family::CHVM:
    case Family::ROT_CHVM: {
      const auto [l1, l2] = lambda_(rng);
      out.has_trace = true;
      out.trace.lambda1 = l1;
      out.trace.lambda2 = l2;
      mu_(pair, rng, out.trace.mu_x, out.trace.mu_y);
      out.a = chvm_a_(pair.x, pair.theta_x, l1, out.trace.mu_x);
      out.b = chvm_b_(pair.y, pair.theta_y, l2, out.trace.mu_y);
      return out;
    }
  }
  throw internal_error("unknown model family");
}

std::array<int, 4> ModelSpec::sample_quadruple(const Design& design,
                                               RngStream& rng) const {
  if (!counterfactually_definite_)
    throw input_error(
        "quadruples need a counterfactually definite model");
  const auto [l1, l2] = lambda_(rng);
  return {det_a_(0, design.a, l1), det_a_(1, design.a_prime, l1),
          det_b_(0, design.b, l2), det_b_(1, design.b_prime, l2)};
}

namespace {

struct VariableSamples {
  std::string name;
  std::array<std::vector<double>, 4> per_pair;
};

constexpr int kBins = 16;
constexpr int kMinPerBinFactor = 20;
constexpr int kMaxDiscrete = 64;
constexpr double kEffectFloor = 0.05;

}  // namespace

IndependenceReport statistical_independence_check(const ModelSpec& model,
                                                  const Design& design,
                                                  std::size_t n_per_pair,
                                                  double alpha,
                                                  std::uint64_t seed) {
  if (!model.traces_hidden_state())
    throw input_error("model exposes no hidden state to check");
  if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha outside (0,1)");
  const std::size_t required =
      static_cast<std::size_t>(kMinPerBinFactor * kBins);
  if (n_per_pair < required)
    throw stat_error("too few trials per setting pair", required);

  const auto pairs = design.all_pairs();
  std::vector<VariableSamples> vars;
  vars.push_back({"lambda1", {}});
  vars.push_back({"lambda2", {}});
  std::size_t mu_x_len = 0, mu_y_len = 0;

  // Instrument-variable tuples per trial, used for the recoverability map.
  std::array<std::vector<std::vector<double>>, 4> mu_tuples;

  RngStream root(seed, 0xC0FFEEULL);
  for (int p = 0; p < 4; ++p) {
    RngStream pair_stream = root.substream(static_cast<std::uint64_t>(p));
    mu_tuples[p].reserve(n_per_pair);
    for (std::size_t t = 0; t < n_per_pair; ++t) {
      RngStream ts = pair_stream.substream(t);
      const TrialOutcome o = model.sample_trial(pairs[p], ts);
      vars[0].per_pair[p].push_back(o.trace.lambda1);
      vars[1].per_pair[p].push_back(o.trace.lambda2);
      mu_x_len = std::max(mu_x_len, o.trace.mu_x.size());
      mu_y_len = std::max(mu_y_len, o.trace.mu_y.size());
      std::vector<double> tup;
      tup.reserve(o.trace.mu_x.size() + o.trace.mu_y.size());
      for (double v : o.trace.mu_x) tup.push_back(v);
      for (double v : o.trace.mu_y) tup.push_back(v);
      mu_tuples[p].push_back(std::move(tup));
    }
  }
  for (std::size_t k = 0; k < mu_x_len; ++k)
    vars.push_back({"mu_x[" + std::to_string(k) + "]", {}});
  for (std::size_t k = 0; k < mu_y_len; ++k)
    vars.push_back({"mu_y[" + std::to_string(k) + "]", {}});
  for (int p = 0; p < 4; ++p) {
    for (const auto& tup : mu_tuples[p]) {
      for (std::size_t k = 0; k < tup.size(); ++k)
        vars[2 + k].per_pair[p].push_back(tup[k]);
    }
  }

  IndependenceReport report;
  report.n_per_pair = n_per_pair;
  report.alpha = alpha;

  for (auto& var : vars) {
    VariableDivergence d;
    d.variable = var.name;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    bool present = false;
    for (const auto& xs : var.per_pair) {
      for (double v : xs) {
        if (first) {
          lo = hi = v;
          first = false;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        present = true;
      }
    }
    if (!present) continue;
    if (hi - lo < 1e-15) {
      d.chi.p_value = 1.0;
      report.variables.push_back(std::move(d));
      continue;
    }
    std::vector<std::vector<std::size_t>> table(
        4, std::vector<std::size_t>(kBins, 0));
    const double width = (hi - lo) / kBins;
    for (int p = 0; p < 4; ++p) {
      for (double v : var.per_pair[p]) {
        int bin = static_cast<int>((v - lo) / width);
        bin = std::clamp(bin, 0, kBins - 1);
        ++table[p][static_cast<std::size_t>(bin)];
      }
    }
    d.chi = stats::chi_square_homogeneity(table);
    d.cramers_v = stats::cramers_v(d.chi, table);
    d.setting_dependent = d.chi.p_value < alpha && d.cramers_v > kEffectFloor;
    report.any_setting_dependent |= d.setting_dependent;
    report.variables.push_back(std::move(d));
  }

  // Recoverability: classify the setting pair from instrument coordinates
  // that take finitely many values, by majority vote per observed tuple.
  std::size_t n_coords = mu_x_len + mu_y_len;
  std::vector<std::size_t> discrete;
  for (std::size_t k = 0; k < n_coords; ++k) {
    std::map<double, int> values;
    bool small = true;
    for (int p = 0; p < 4 && small; ++p) {
      for (const auto& tup : mu_tuples[p]) {
        if (k < tup.size()) values[tup[k]] = 1;
        if (values.size() > kMaxDiscrete) {
          small = false;
          break;
        }
      }
    }
    if (small && !values.empty()) discrete.push_back(k);
  }
  if (!discrete.empty()) {
    report.recoverability_checked = true;
    std::map<std::vector<double>, std::array<std::size_t, 4>> key_counts;
    for (int p = 0; p < 4; ++p) {
      for (const auto& tup : mu_tuples[p]) {
        std::vector<double> key;
        key.reserve(discrete.size());
        for (std::size_t k : discrete)
          key.push_back(k < tup.size() ? tup[k] : 0.0);
        key_counts[key][static_cast<std::size_t>(p)] += 1;
      }
    }
    std::size_t correct = 0, total = 0;
    for (const auto& [key, counts] : key_counts) {
      std::size_t best = 0, sum = 0;
      for (std::size_t c : counts) {
        best = std::max(best, c);
        sum += c;
      }
      correct += best;
      total += sum;
    }
    report.recoverability_accuracy =
        total == 0 ? 0.0
                   : static_cast<double>(correct) / static_cast<double>(total);
  }
  return report;
}

}  // namespace bell::models
