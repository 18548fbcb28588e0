#include "bell/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bell/errors.hpp"

namespace bell::experiment {

namespace {

constexpr std::uint64_t kPairStream = 0x7061697273ULL;
constexpr std::uint64_t kQuadStream = 0x7175616473ULL;
constexpr std::uint64_t kRepStream = 0x72657073ULL;
constexpr std::uint64_t kMcStream = 0x6D63ULL;
constexpr std::size_t kBlock = 4096;

struct RoutedTrial {
  std::int8_t x, y, a, b;
};

// Trials are generated from per-trial substreams, so any worker computes
// trial t identically; routing stays sequential in t.
void generate_wave(const models::ModelSpec& model, const models::Design& design,
                   const RngStream& root, std::size_t first, std::size_t count,
                   int workers, std::vector<RoutedTrial>& out) {
  out.resize(count);
  const std::size_t n_blocks = (count + kBlock - 1) / kBlock;
  parallel_for_blocks(n_blocks, workers, [&](std::size_t blk) {
    const std::size_t lo = blk * kBlock;
    const std::size_t hi = std::min(lo + kBlock, count);
    for (std::size_t i = lo; i < hi; ++i) {
      RngStream ts = root.substream(first + i);
      const int x = static_cast<int>(ts.next_u64() >> 63);
      const int y = static_cast<int>(ts.next_u64() >> 63);
      const models::TrialOutcome o = model.sample_trial(design.pair(x, y), ts);
      out[i] = {static_cast<std::int8_t>(x), static_cast<std::int8_t>(y),
                static_cast<std::int8_t>(o.a), static_cast<std::int8_t>(o.b)};
    }
  });
}

PairEstimate estimate_from_sums(long sum, std::size_t n) {
  PairEstimate est;
  est.n = n;
  if (n == 0) return est;
  est.e = static_cast<double>(sum) / static_cast<double>(n);
  if (n >= 2) {
    const double var = (1.0 - est.e * est.e) / static_cast<double>(n - 1);
    est.se = std::sqrt(std::max(0.0, var));
  }
  return est;
}

constexpr double kTsirelson = 2.0 * 1.4142135623730951;

void finalize_report(ChshReport& r) {
  r.s = r.pairs[0].e - r.pairs[1].e + r.pairs[2].e + r.pairs[3].e;
  double v = 0.0;
  for (const auto& p : r.pairs) v += p.se * p.se;
  r.se = std::sqrt(v);
  r.violates_classical_bound = std::fabs(r.s) > 2.0;
  r.within_tsirelson = std::fabs(r.s) <= kTsirelson + 1e-9;
}

struct McMoments {
  double mean_a = 0.0, mean_b = 0.0, mean_ab = 0.0;
  double se_a = 0.0, se_b = 0.0, se_ab = 0.0;
};

McMoments mc_moments(const models::ModelSpec& model,
                     const models::SettingPair& pair, std::size_t n,
                     std::uint64_t seed) {
  if (n < 2) throw input_error("Monte Carlo fallback needs n >= 2");
  RngStream root(seed, kMcStream);
  long sa = 0, sb = 0, sab = 0;
  for (std::size_t t = 0; t < n; ++t) {
    RngStream ts = root.substream(t);
    const models::TrialOutcome o = model.sample_trial(pair, ts);
    sa += o.a;
    sb += o.b;
    sab += o.a * o.b;
  }
  McMoments m;
  const auto fin = [n](long s, double& mean, double& se) {
    mean = static_cast<double>(s) / static_cast<double>(n);
    se = std::sqrt(std::max(0.0, (1.0 - mean * mean) /
                                     static_cast<double>(n - 1)));
  };
  fin(sa, m.mean_a, m.se_a);
  fin(sb, m.mean_b, m.se_b);
  fin(sab, m.mean_ab, m.se_ab);
  return m;
}

EqualityCheck make_check(std::string name, double observed, double expected,
                         double se, double threshold) {
  EqualityCheck c;
  c.name = std::move(name);
  c.observed = observed;
  c.expected = expected;
  c.se = se;
  if (se > 0.0) {
    c.z = (observed - expected) / se;
    c.p_value = stats::normal_two_sided_p(c.z);
  } else {
    c.z = observed == expected ? 0.0 : std::numeric_limits<double>::infinity();
    c.p_value = observed == expected ? 1.0 : 0.0;
  }
  c.consistent = c.p_value >= threshold;
  return c;
}

const char* pair_label(int idx) {
  switch (idx) {
    case 0: return "(x,y)";
    case 1: return "(x,y')";
    case 2: return "(x',y)";
    case 3: return "(x',y')";
  }
  return "?";
}

}  // namespace

PairExperiment run_pair_experiments(const models::ModelSpec& model,
                                    const models::Design& design,
                                    std::size_t n_per_pair, std::uint64_t seed,
                                    int workers) {
  if (n_per_pair == 0) throw input_error("n_per_pair must be positive");
  PairExperiment ex;
  ex.design = design;
  const auto pairs = design.all_pairs();
  for (int i = 0; i < 4; ++i) {
    ex.sheets[i].pair = pairs[i];
    ex.sheets[i].a.reserve(n_per_pair);
    ex.sheets[i].b.reserve(n_per_pair);
  }

  RngStream root(seed, kPairStream);
  std::size_t next_trial = 0;
  std::size_t remaining = 4 * n_per_pair;
  std::vector<RoutedTrial> wave;
  while (remaining > 0) {
    // Slack covers multinomial imbalance; the tail loop covers the rest.
    const std::size_t want =
        remaining + 8 * static_cast<std::size_t>(
                            std::sqrt(static_cast<double>(remaining)) + 1.0);
    generate_wave(model, design, root, next_trial, want, workers, wave);
    next_trial += want;
    for (const RoutedTrial& t : wave) {
      PairSheet& sheet = ex.sheets[t.x * 2 + t.y];
      if (sheet.n() >= n_per_pair) continue;
      sheet.a.push_back(t.a);
      sheet.b.push_back(t.b);
      if (--remaining == 0) break;
    }
  }
  return ex;
}

QuadrupleSheet run_counterfactual_experiment(const models::ModelSpec& model,
                                             const models::Design& design,
                                             std::size_t n_rows,
                                             std::uint64_t seed, int workers) {
  if (n_rows == 0) throw input_error("n_rows must be positive");
  QuadrupleSheet sheet;
  sheet.design = design;
  sheet.rows.resize(n_rows);
  RngStream root(seed, kQuadStream);
  const std::size_t n_blocks = (n_rows + kBlock - 1) / kBlock;
  parallel_for_blocks(n_blocks, workers, [&](std::size_t blk) {
    const std::size_t lo = blk * kBlock;
    const std::size_t hi = std::min(lo + kBlock, n_rows);
    for (std::size_t i = lo; i < hi; ++i) {
      RngStream ts = root.substream(i);
      const std::array<int, 4> q = model.sample_quadruple(design, ts);
      for (int k = 0; k < 4; ++k)
        sheet.rows[i][k] = static_cast<std::int8_t>(q[k]);
    }
  });
  return sheet;
}

ChshReport chsh_from_pairs(const PairExperiment& experiment) {
  ChshReport r;
  for (int i = 0; i < 4; ++i) {
    const PairSheet& sheet = experiment.sheets[i];
    if (sheet.pair.x * 2 + sheet.pair.y != i)
      throw input_error("sheets out of context order (duplicate or missing)");
    if (sheet.a.size() != sheet.b.size())
      throw input_error("sheet arm lengths differ");
    if (sheet.n() == 0) throw input_error("empty sheet");
    long sum = 0;
    for (std::size_t t = 0; t < sheet.n(); ++t) {
      const int a = sheet.a[t], b = sheet.b[t];
      if ((a != 1 && a != -1) || (b != 1 && b != -1))
        throw input_error("outcomes must be +1 or -1");
      sum += a * b;
    }
    r.pairs[i] = estimate_from_sums(sum, sheet.n());
  }
  finalize_report(r);
  return r;
}

QuadrupleChsh chsh_from_quadruples(const QuadrupleSheet& sheet) {
  if (sheet.rows.empty()) throw input_error("empty quadruple sheet");
  QuadrupleChsh out;
  const std::size_t n = sheet.rows.size();
  std::array<long, 4> sums{0, 0, 0, 0};
  double s_sum = 0.0, s_sq = 0.0;
  out.min_row_s = 4.0;
  out.max_row_s = -4.0;
  for (const auto& row : sheet.rows) {
    for (int v : row)
      if (v != 1 && v != -1) throw input_error("outcomes must be +1 or -1");
    const int ab = row[0] * row[2];
    const int abp = row[0] * row[3];
    const int apb = row[1] * row[2];
    const int apbp = row[1] * row[3];
    const int s = ab - abp + apb + apbp;
    if (s != 2 && s != -2)
      throw internal_error("row combination left the two-point set");
    sums[0] += ab;
    sums[1] += abp;
    sums[2] += apb;
    sums[3] += apbp;
    s_sum += s;
    s_sq += static_cast<double>(s) * s;
    out.min_row_s = std::min(out.min_row_s, static_cast<double>(s));
    out.max_row_s = std::max(out.max_row_s, static_cast<double>(s));
  }
  for (int i = 0; i < 4; ++i)
    out.report.pairs[i] = estimate_from_sums(sums[i], n);
  finalize_report(out.report);
  // Row values are coupled, so the spread of per-row S replaces the
  // independent-sheets quadrature.
  const double mean_s = s_sum / static_cast<double>(n);
  if (n >= 2) {
    const double var =
        (s_sq - static_cast<double>(n) * mean_s * mean_s) /
        static_cast<double>(n - 1);
    out.report.se = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
  } else {
    out.report.se = 0.0;
  }
  return out;
}

ViolationFrequency violation_frequency(const models::ModelSpec& model,
                                       const models::Design& design,
                                       std::size_t n_per_pair,
                                       std::size_t replications, double alpha,
                                       std::uint64_t seed, int workers) {
  if (replications == 0) throw input_error("replications must be positive");
  RngStream master(seed, kRepStream);
  std::vector<std::uint64_t> rep_seeds(replications);
  for (std::size_t r = 0; r < replications; ++r) {
    RngStream rs = master.substream(r);
    rep_seeds[r] = rs.next_u64();
  }
  std::vector<std::uint8_t> violated(replications, 0);
  parallel_for_blocks(replications, workers, [&](std::size_t r) {
    const PairExperiment ex =
        run_pair_experiments(model, design, n_per_pair, rep_seeds[r], 1);
    const ChshReport rep = chsh_from_pairs(ex);
    violated[r] = rep.violates_classical_bound ? 1 : 0;
  });
  ViolationFrequency out;
  out.replications = replications;
  out.violations = static_cast<std::size_t>(
      std::accumulate(violated.begin(), violated.end(), 0L));
  out.fraction =
      static_cast<double>(out.violations) / static_cast<double>(replications);
  out.ci = stats::wilson_interval(out.violations, replications, alpha);
  return out;
}

CouplingReport coupling_check(const models::ModelSpec& model,
                              const PairExperiment& experiment, double alpha,
                              std::size_t mc_fallback_n,
                              std::uint64_t mc_seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha outside (0,1)");
  CouplingReport report;
  report.alpha = alpha;
  constexpr int kChecks = 16;
  const double threshold = alpha / kChecks;

  struct SheetStats {
    PairEstimate a, b, ab;
  };
  std::array<SheetStats, 4> st;
  for (int i = 0; i < 4; ++i) {
    const PairSheet& sheet = experiment.sheets[i];
    if (sheet.n() < 2) throw input_error("sheets need at least two trials");
    long sa = 0, sb = 0, sab = 0;
    for (std::size_t t = 0; t < sheet.n(); ++t) {
      sa += sheet.a[t];
      sb += sheet.b[t];
      sab += sheet.a[t] * sheet.b[t];
    }
    st[i].a = estimate_from_sums(sa, sheet.n());
    st[i].b = estimate_from_sums(sb, sheet.n());
    st[i].ab = estimate_from_sums(sab, sheet.n());
  }

  for (int i = 0; i < 4; ++i) {
    const models::SettingPair& pair = experiment.sheets[i].pair;
    const std::string tag = pair_label(i);

    auto mean_a = model.analytic_single_arm_mean(models::Arm::A, pair.x,
                                                 pair.theta_x);
    auto mean_b = model.analytic_single_arm_mean(models::Arm::B, pair.y,
                                                 pair.theta_y);
    auto mean_ab = model.analytic_expectation(pair);
    McMoments mc;
    bool have_mc = false;
    if (!mean_a || !mean_b || !mean_ab) {
      mc = mc_moments(model, pair, mc_fallback_n,
                      mc_seed + static_cast<std::uint64_t>(i));
      have_mc = true;
    }

    const double ea = mean_a ? *mean_a : mc.mean_a;
    const double ea_se = mean_a ? 0.0 : mc.se_a;
    report.checks.push_back(make_check(
        "E[A] " + tag, st[i].a.e, ea,
        std::sqrt(st[i].a.se * st[i].a.se + ea_se * ea_se), threshold));

    const double eb = mean_b ? *mean_b : mc.mean_b;
    const double eb_se = mean_b ? 0.0 : mc.se_b;
    report.checks.push_back(make_check(
        "E[B] " + tag, st[i].b.e, eb,
        std::sqrt(st[i].b.se * st[i].b.se + eb_se * eb_se), threshold));

    const double eab = mean_ab ? *mean_ab : mc.mean_ab;
    const double eab_se = mean_ab ? 0.0 : mc.se_ab;
    report.checks.push_back(make_check(
        "E[AB] " + tag, st[i].ab.e, eab,
        std::sqrt(st[i].ab.se * st[i].ab.se + eab_se * eab_se), threshold));
    (void)have_mc;
  }

  // The same local marginal must reappear wherever its setting is reused.
  struct Cross {
    const char* name;
    int s1, s2;
    bool arm_a;
  };
  const Cross crosses[4] = {{"E[A] at x across y contexts", 0, 1, true},
                            {"E[A] at x' across y contexts", 2, 3, true},
                            {"E[B] at y across x contexts", 0, 2, false},
                            {"E[B] at y' across x contexts", 1, 3, false}};
  for (const Cross& c : crosses) {
    const PairEstimate& p1 = c.arm_a ? st[c.s1].a : st[c.s1].b;
    const PairEstimate& p2 = c.arm_a ? st[c.s2].a : st[c.s2].b;
    report.checks.push_back(
        make_check(c.name, p1.e, p2.e,
                   std::sqrt(p1.se * p1.se + p2.se * p2.se), threshold));
  }

  for (const EqualityCheck& c : report.checks)
    if (!c.consistent) ++report.failures;
  report.pass = report.failures == 0;
  return report;
}

}  // namespace bell::experiment
