#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bell/rng.hpp"
#include "bell/stats.hpp"

namespace bell::models {

enum class Family { LRHVM, SHVM, CHVM, ROT_CHVM, QUANTUM };
enum class Arm { A, B };

const char* family_name(Family f);

// One joint measurement context: labels select the primed (1) or unprimed
// (0) setting on each side, angles carry the analyzer orientations.
struct SettingPair {
  int x = 0;
  int y = 0;
  double theta_x = 0.0;
  double theta_y = 0.0;
};

// The four angles of a CHSH design.
struct Design {
  double a = 0.0;
  double a_prime = 0.0;
  double b = 0.0;
  double b_prime = 0.0;

  SettingPair pair(int x, int y) const;
  // Context order used everywhere: (x,y), (x,y'), (x',y), (x',y').
  std::array<SettingPair, 4> all_pairs() const;
  static Design standard();  // a=0, a'=pi/2, b=pi/4, b'=3pi/4
};

struct HiddenTrace {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> mu_x;  // instrument variables, empty if the family has none
  std::vector<double> mu_y;
};

struct TrialOutcome {
  int a = 0;
  int b = 0;
  bool has_trace = false;
  HiddenTrace trace;
};

// Reference-instance kernels. sign(0) counts as +1 throughout.
int lrhvm_sign_outcome(double lambda, double theta, Arm arm);
double shvm_plus_probability(double lambda, double theta, Arm arm);

// Closed forms for the reference instances.
double lrhvm_sawtooth_expectation(double theta_xy);
double shvm_reference_expectation(double theta_xy);

// A sampling model for one trial of a two-arm experiment. Reference
// instances are provided as named constructors; custom instances accept
// callables. Outcome draws always consume randomness in a fixed order
// (hidden pair, then arm A, then arm B), so trials are reproducible from
// their stream alone.
class ModelSpec {
 public:
  using LambdaSampler = std::function<std::pair<double, double>(RngStream&)>;
  using DetOutcome = std::function<int(int label, double theta, double lambda)>;
  using ProbOutcome =
      std::function<double(int label, double theta, double lambda)>;
  using MuSampler = std::function<void(const SettingPair&, RngStream&,
                                       std::vector<double>& mu_x,
                                       std::vector<double>& mu_y)>;
  using ChvmOutcome = std::function<int(int label, double theta, double lambda,
                                        const std::vector<double>& mu)>;
  using AnalyticE = std::function<std::optional<double>(const SettingPair&)>;
  using AnalyticMean =
      std::function<std::optional<double>(Arm, int label, double theta)>;

  static ModelSpec lrhvm_reference();
  static ModelSpec shvm_reference();
  static ModelSpec rot_chvm_reference();
  static ModelSpec quantum_singlet();
  // Product model pinned to the classical boundary: deterministic A, A', B
  // and a fair-coin B' give S exactly 2 with nonzero sampling variance.
  static ModelSpec shvm_boundary();

  static ModelSpec lrhvm_custom(std::string name, LambdaSampler lambda,
                                DetOutcome a, DetOutcome b,
                                AnalyticE analytic = nullptr,
                                AnalyticMean means = nullptr);
  static ModelSpec shvm_custom(std::string name, LambdaSampler lambda,
                               ProbOutcome pa, ProbOutcome pb,
                               AnalyticE analytic = nullptr,
                               AnalyticMean means = nullptr);
  static ModelSpec chvm_custom(std::string name, LambdaSampler lambda,
                               MuSampler mu, ChvmOutcome a, ChvmOutcome b,
                               AnalyticE analytic = nullptr,
                               AnalyticMean means = nullptr);

  Family family() const { return family_; }
  const std::string& name() const { return name_; }
  bool counterfactually_definite() const { return counterfactually_definite_; }
  bool traces_hidden_state() const { return traces_; }

  std::optional<double> analytic_expectation(const SettingPair& pair) const;
  std::optional<double> analytic_single_arm_mean(Arm arm, int label,
                                                 double theta) const;

  TrialOutcome sample_trial(const SettingPair& pair, RngStream& rng) const;
  // All four outcomes from one hidden state; only counterfactually
  // definite families support this. Order: a, a', b, b'.
  std::array<int, 4> sample_quadruple(const Design& design,
                                      RngStream& rng) const;

 private:
  ModelSpec() = default;

  Family family_ = Family::LRHVM;
  std::string name_;
  bool counterfactually_definite_ = false;
  bool traces_ = false;
  LambdaSampler lambda_;
  DetOutcome det_a_, det_b_;
  ProbOutcome prob_a_, prob_b_;
  MuSampler mu_;
  ChvmOutcome chvm_a_, chvm_b_;
  AnalyticE analytic_e_;
  AnalyticMean analytic_mean_;
};

struct VariableDivergence {
  std::string variable;
  double cramers_v = 0.0;
  stats::ChiSquareResult chi;
  bool setting_dependent = false;
};

struct IndependenceReport {
  std::vector<VariableDivergence> variables;
  bool any_setting_dependent = false;
  // Whether the setting pair is readable back off the instrument
  // variables. Checked when some instrument coordinate takes finitely
  // many values; accuracy is the majority-vote classification rate.
  bool recoverability_checked = false;
  double recoverability_accuracy = 0.0;
  std::size_t n_per_pair = 0;
  double alpha = 0.0;
};

// Runs traced trials in every context of the design and tests, per hidden
// coordinate, whether its distribution depends on the setting pair.
IndependenceReport statistical_independence_check(const ModelSpec& model,
                                                  const Design& design,
                                                  std::size_t n_per_pair,
                                                  double alpha,
                                                  std::uint64_t seed);

}  // namespace bell::models
