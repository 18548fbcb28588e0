#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bell/bertrand.hpp"
#include "bell/coincidence.hpp"
#include "bell/csv.hpp"
#include "bell/errors.hpp"
#include "bell/experiment.hpp"
#include "bell/models.hpp"
#include "bell/purity.hpp"
#include "bell/reshuffle.hpp"
#include "bell/rng.hpp"

namespace {

namespace fs = std::filesystem;
using bell::io::Format;
using bell::io::Meta;

constexpr std::uint64_t kCliPurityStream = 0x636C69ULL;

struct GlobalOptions {
  std::uint64_t seed = 12345;
  int workers = 1;
  std::string format = "csv";
  std::string out_dir;
};

Format format_of(const GlobalOptions& g) {
  return g.format == "jsonl" ? Format::Jsonl : Format::Csv;
}

const char* extension_of(const GlobalOptions& g) {
  return g.format == "jsonl" ? ".jsonl" : ".csv";
}

fs::path output_path(const GlobalOptions& g, const std::string& stem) {
  fs::path dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw bell::config_error("cannot create output directory '" +
                             dir.string() + "': " + ec.message());
  return dir / (stem + extension_of(g));
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path);
  if (!os)
    throw bell::config_error("cannot open '" + path.string() +
                             "' for writing");
  return os;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw bell::input_error("cannot open '" + path + "' for reading");
  return is;
}

double parse_angle(const std::string& raw) {
  std::string s = raw;
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  while (!s.empty() && s.back() == ' ') s.pop_back();
  bool degrees = false;
  if (s.size() > 3 && s.substr(s.size() - 3) == "deg") {
    degrees = true;
    s.resize(s.size() - 3);
  } else if (s.size() > 1 && s.back() == 'd') {
    degrees = true;
    s.pop_back();
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw bell::input_error("bad angle '" + raw + "'");
    return degrees ? v * 3.14159265358979323846 / 180.0 : v;
  } catch (const std::logic_error&) {
    throw bell::input_error("bad angle '" + raw + "'");
  }
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bell::models::Design parse_design(const std::string& angles) {
  if (angles.empty()) return bell::models::Design::standard();
  const auto parts = split_list(angles);
  if (parts.size() != 4)
    throw bell::input_error(
        "--angles needs exactly four comma-separated values (a,a',b,b')");
  return bell::models::Design{parse_angle(parts[0]), parse_angle(parts[1]),
                              parse_angle(parts[2]), parse_angle(parts[3])};
}

std::vector<double> parse_windows(const std::string& csv) {
  std::vector<double> out;
  for (const std::string& part : split_list(csv)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(part, &used);
      if (used != part.size() || !(v > 0.0))
        throw bell::input_error("bad window '" + part + "'");
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw bell::input_error("bad window '" + part + "'");
    }
  }
  return out;
}

bell::models::ModelSpec model_by_name(const std::string& name) {
  using bell::models::ModelSpec;
  if (name == "lrhvm") return ModelSpec::lrhvm_reference();
  if (name == "shvm") return ModelSpec::shvm_reference();
  if (name == "rot-chvm") return ModelSpec::rot_chvm_reference();
  if (name == "quantum") return ModelSpec::quantum_singlet();
  if (name == "shvm-boundary") return ModelSpec::shvm_boundary();
  throw bell::input_error("unknown model '" + name + "'");
}

std::string angles_string(const bell::models::Design& d) {
  return bell::io::format_double(d.a) + "," +
         bell::io::format_double(d.a_prime) + "," +
         bell::io::format_double(d.b) + "," +
         bell::io::format_double(d.b_prime);
}

constexpr const char* kVersion = "1.0.0";

// The config echo deliberately leaves out --workers: worker count never
// changes any result, so two runs differing only there stay byte-identical.
Meta base_meta(const GlobalOptions& g, const std::string& command) {
  return {{"tool", std::string("bell-lab ") + kVersion},
          {"command", command},
          {"seed", std::to_string(g.seed)},
          {"format", g.format}};
}

void print_chsh(const bell::experiment::ChshReport& r) {
  static const char* kLabels[4] = {"E(x,y)  ", "E(x,y') ", "E(x',y) ",
                                   "E(x',y')"};
  for (int i = 0; i < 4; ++i)
    std::cout << kLabels[i] << " = " << bell::io::format_double(r.pairs[i].e)
              << " +- " << bell::io::format_double(r.pairs[i].se)
              << "  (n=" << r.pairs[i].n << ")\n";
  std::cout << "S = " << bell::io::format_double(r.s) << " +- "
            << bell::io::format_double(r.se) << "\n";
  std::cout << "|S| > 2: " << (r.violates_classical_bound ? "yes" : "no")
            << ", within |S| <= 2*sqrt(2): "
            << (r.within_tsirelson ? "yes" : "no") << "\n";
}

struct ChshArgs {
  std::string model = "quantum";
  std::string angles;
  std::size_t n = 10000;
  bool save_trials = false;
};

void run_chsh(const GlobalOptions& g, const ChshArgs& a) {
  const auto design = parse_design(a.angles);
  const auto model = model_by_name(a.model);
  const auto ex = bell::experiment::run_pair_experiments(
      model, design, a.n, g.seed, g.workers);
  const auto report = bell::experiment::chsh_from_pairs(ex);

  Meta meta = base_meta(g, "chsh");
  meta.push_back({"model", a.model});
  meta.push_back({"angles", angles_string(design)});
  meta.push_back({"n_per_pair", std::to_string(a.n)});

  auto os = open_output(output_path(g, "chsh_report"));
  bell::io::write_chsh_report(os, report, meta, format_of(g));
  if (a.save_trials) {
    auto ts = open_output(output_path(g, "pair_trials"));
    bell::io::write_pair_experiment(ts, ex, meta, format_of(g));
  }
  print_chsh(report);
}

struct QuadArgs {
  std::string model = "lrhvm";
  std::string angles;
  std::size_t n = 10000;
  bool save_trials = false;
};

void run_quadruples(const GlobalOptions& g, const QuadArgs& a) {
  const auto design = parse_design(a.angles);
  const auto model = model_by_name(a.model);
  const auto sheet = bell::experiment::run_counterfactual_experiment(
      model, design, a.n, g.seed, g.workers);
  const auto result = bell::experiment::chsh_from_quadruples(sheet);

  Meta meta = base_meta(g, "quadruples");
  meta.push_back({"model", a.model});
  meta.push_back({"angles", angles_string(design)});
  meta.push_back({"n_rows", std::to_string(a.n)});
  meta.push_back({"min_row_s", bell::io::format_double(result.min_row_s)});
  meta.push_back({"max_row_s", bell::io::format_double(result.max_row_s)});

  auto os = open_output(output_path(g, "quadruple_report"));
  bell::io::write_chsh_report(os, result.report, meta, format_of(g));
  if (a.save_trials) {
    auto ts = open_output(output_path(g, "quadruple_trials"));
    bell::io::write_quadruples(ts, sheet, meta, format_of(g));
  }
  print_chsh(result.report);
  std::cout << "per-row s range: ["
            << bell::io::format_double(result.min_row_s) << ", "
            << bell::io::format_double(result.max_row_s) << "]\n";
}

struct ViolationArgs {
  std::string model = "shvm-boundary";
  std::string angles;
  std::size_t n = 1000;
  std::size_t reps = 2000;
  double alpha = 0.05;
};

void run_violation_freq(const GlobalOptions& g, const ViolationArgs& a) {
  const auto design = parse_design(a.angles);
  const auto model = model_by_name(a.model);
  const auto vf = bell::experiment::violation_frequency(
      model, design, a.n, a.reps, a.alpha, g.seed, g.workers);

  Meta meta = base_meta(g, "violation-freq");
  meta.push_back({"model", a.model});
  meta.push_back({"angles", angles_string(design)});
  meta.push_back({"n_per_pair", std::to_string(a.n)});
  meta.push_back({"replications", std::to_string(a.reps)});
  meta.push_back({"alpha", bell::io::format_double(a.alpha)});

  auto os = open_output(output_path(g, "violation_freq"));
  if (format_of(g) == Format::Csv) {
    for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
    os << "fraction,ci_lo,ci_hi,violations,replications\n";
    os << bell::io::format_double(vf.fraction) << ","
       << bell::io::format_double(vf.ci.lo) << ","
       << bell::io::format_double(vf.ci.hi) << "," << vf.violations << ","
       << vf.replications << "\n";
  } else {
    nlohmann::json m;
    m["kind"] = "violation_freq";
    for (const auto& [k, v] : meta) m[k] = v;
    os << m.dump() << "\n";
    nlohmann::json j;
    j["fraction"] = vf.fraction;
    j["ci_lo"] = vf.ci.lo;
    j["ci_hi"] = vf.ci.hi;
    j["violations"] = vf.violations;
    j["replications"] = vf.replications;
    os << j.dump() << "\n";
  }
  std::cout << "fraction of replications with |S| > 2: "
            << bell::io::format_double(vf.fraction) << "  ("
            << vf.violations << "/" << vf.replications << ", CI ["
            << bell::io::format_double(vf.ci.lo) << ", "
            << bell::io::format_double(vf.ci.hi) << "])\n";
}

struct CouplingArgs {
  std::string model = "lrhvm";
  std::string angles;
  std::string trials_file;
  std::size_t n = 20000;
  double alpha = 0.01;
};

void run_coupling(const GlobalOptions& g, const CouplingArgs& a) {
  const auto design = parse_design(a.angles);
  const auto model = model_by_name(a.model);
  bell::experiment::PairExperiment ex;
  if (!a.trials_file.empty()) {
    auto is = open_input(a.trials_file);
    ex = bell::io::read_pair_experiment(is, design);
  } else {
    ex = bell::experiment::run_pair_experiments(model, design, a.n, g.seed,
                                                g.workers);
  }
  auto report = bell::experiment::coupling_check(model, ex, a.alpha);

  // Drift inside a sheet would undermine the i.i.d. standard errors the
  // checks rely on, so flag sheets whose halves disagree.
  static const char* kSheetNames[4] = {"(x,y)", "(x,y')", "(x',y)", "(x',y')"};
  std::string annotation;
  for (int i = 0; i < 4; ++i) {
    const auto& sheet = ex.sheets[i];
    const std::size_t half = sheet.n() / 2;
    bell::purity::RunSeries h1{"h1", {}}, h2{"h2", {}};
    for (std::size_t t = 0; t < sheet.n(); ++t) {
      const int prod = sheet.a[t] * sheet.b[t];
      (t < half ? h1 : h2).outcomes.push_back(prod);
    }
    const auto guard = bell::purity::homogeneity_guard({h1, h2}, a.alpha / 4);
    if (!guard.homogeneous) {
      if (!annotation.empty()) annotation += "; ";
      annotation += std::string("sheet ") + kSheetNames[i] +
                    " drifts between halves (p=" +
                    bell::io::format_double(guard.chi.p_value) + ")";
    }
  }
  report.annotation = annotation;

  Meta meta = base_meta(g, "coupling");
  meta.push_back({"model", a.model});
  meta.push_back({"angles", angles_string(design)});
  meta.push_back({"alpha", bell::io::format_double(a.alpha)});
  if (!a.trials_file.empty()) meta.push_back({"trials", a.trials_file});
  else meta.push_back({"n_per_pair", std::to_string(a.n)});
  if (!annotation.empty()) meta.push_back({"annotation", annotation});

  auto os = open_output(output_path(g, "coupling"));
  if (format_of(g) == Format::Csv) {
    for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
    os << "check,observed,expected,se,z,p_value,consistent\n";
    for (const auto& c : report.checks)
      os << c.name << "," << bell::io::format_double(c.observed) << ","
         << bell::io::format_double(c.expected) << ","
         << bell::io::format_double(c.se) << ","
         << bell::io::format_double(c.z) << ","
         << bell::io::format_double(c.p_value) << ","
         << (c.consistent ? 1 : 0) << "\n";
  } else {
    nlohmann::json m;
    m["kind"] = "coupling";
    for (const auto& [k, v] : meta) m[k] = v;
    os << m.dump() << "\n";
    for (const auto& c : report.checks) {
      nlohmann::json j;
      j["check"] = c.name;
      j["observed"] = c.observed;
      j["expected"] = c.expected;
      j["se"] = c.se;
      j["z"] = c.z;
      j["p_value"] = c.p_value;
      j["consistent"] = c.consistent;
      os << j.dump() << "\n";
    }
  }
  std::cout << "coupling checks: " << report.checks.size() << ", failures: "
            << report.failures << " -> "
            << (report.pass ? "consistent" : "inconsistent") << "\n";
  if (!annotation.empty()) std::cout << "note: " << annotation << "\n";
}

struct ReshuffleArgs {
  std::string counts_file;
  std::string quadruples_file;
  std::string model = "lrhvm";
  std::string angles;
  std::size_t n = 1000;
};

void run_reshuffle(const GlobalOptions& g, const ReshuffleArgs& a) {
  const auto design = parse_design(a.angles);
  bell::reshuffle::CountTable counts;
  Meta meta = base_meta(g, "reshuffle");
  if (!a.counts_file.empty()) {
    auto is = open_input(a.counts_file);
    counts = bell::io::read_counts(is);
    meta.push_back({"counts", a.counts_file});
  } else if (!a.quadruples_file.empty()) {
    auto is = open_input(a.quadruples_file);
    const auto sheet = bell::io::read_quadruples(is, design);
    counts = bell::reshuffle::CountTable::from_quadruples(sheet);
    meta.push_back({"quadruples", a.quadruples_file});
  } else {
    const auto model = model_by_name(a.model);
    const auto ex = bell::experiment::run_pair_experiments(
        model, design, a.n, g.seed, g.workers);
    counts = bell::reshuffle::CountTable::from_pair_sheets(ex.sheets);
    meta.push_back({"model", a.model});
    meta.push_back({"angles", angles_string(design)});
    meta.push_back({"n_per_pair", std::to_string(a.n)});
  }

  const auto result = bell::reshuffle::reshuffle_feasibility(counts);
  meta.push_back({"feasible", result.feasible ? "1" : "0"});
  meta.push_back(
      {"max_count_excess", std::to_string(result.max_count_excess)});
  if (!result.feasible)
    meta.push_back({"violated_condition", result.violated_condition});

  auto os = open_output(output_path(g, "reshuffle"));
  if (format_of(g) == Format::Csv) {
    for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
    os << "a,a_prime,b,b_prime,count\n";
    if (result.feasible) {
      for (int i = 0; i < 16; ++i)
        os << (1 - 2 * ((i >> 3) & 1)) << "," << (1 - 2 * ((i >> 2) & 1))
           << "," << (1 - 2 * ((i >> 1) & 1)) << "," << (1 - 2 * (i & 1))
           << "," << result.witness[i] << "\n";
    }
  } else {
    nlohmann::json m;
    m["kind"] = "reshuffle";
    for (const auto& [k, v] : meta) m[k] = v;
    os << m.dump() << "\n";
    if (result.feasible) {
      for (int i = 0; i < 16; ++i) {
        nlohmann::json j;
        j["a"] = 1 - 2 * ((i >> 3) & 1);
        j["a_prime"] = 1 - 2 * ((i >> 2) & 1);
        j["b"] = 1 - 2 * ((i >> 1) & 1);
        j["b_prime"] = 1 - 2 * (i & 1);
        j["count"] = result.witness[i];
        os << j.dump() << "\n";
      }
    }
  }
  if (result.feasible)
    std::cout << "feasible: one table of quadruple counts reproduces all "
                 "four pair tables (written to output)\n";
  else
    std::cout << "infeasible: " << result.violated_condition << "\n";
  std::cout << "max count-inequality excess: " << result.max_count_excess
            << " (<= 0 means every count inequality holds)\n";
}

struct CoincidenceArgs {
  std::string windows =
      "2e-06,4e-06,8e-06,1.6e-05,3.2e-05,6.4e-05,0.000128,0.000256,0.0004";
  std::string angles;
  std::string mode = "nearest";
  std::size_t n = 200000;
  bool null_delays = false;
  bool save_events = false;
};

void run_coincidence(const GlobalOptions& g, const CoincidenceArgs& a) {
  const auto design = parse_design(a.angles);
  const auto windows = parse_windows(a.windows);
  const auto dm = a.null_delays
                      ? bell::coincidence::setting_independent_delay_model()
                      : bell::coincidence::reference_delay_model();
  const auto mode = a.mode == "fixed"
                        ? bell::coincidence::PairingMode::FixedBins
                        : bell::coincidence::PairingMode::NearestNeighbor;
  const auto rows = bell::coincidence::coincidence_chsh_scan(
      dm, design, a.n, windows, mode, g.seed);

  Meta meta = base_meta(g, "coincidence");
  meta.push_back({"angles", angles_string(design)});
  meta.push_back({"n_trials", std::to_string(a.n)});
  meta.push_back({"mode", a.mode});
  meta.push_back({"delays", a.null_delays ? "setting-independent"
                                          : "setting-dependent"});

  auto os = open_output(output_path(g, "coincidence_scan"));
  bell::io::write_scan(os, rows, meta, format_of(g));
  if (a.save_events) {
    std::vector<bell::models::SettingPair> schedule;
    // The scan derives its schedule from the seed; regenerate for the log.
    bell::RngStream sched(g.seed, 0x73636864ULL);
    for (std::size_t i = 0; i < a.n; ++i) {
      bell::RngStream ts = sched.substream(i);
      const int x = static_cast<int>(ts.next_u64() >> 63);
      const int y = static_cast<int>(ts.next_u64() >> 63);
      schedule.push_back(design.pair(x, y));
    }
    const auto streams =
        bell::coincidence::generate_event_streams(dm, schedule, g.seed);
    auto es = open_output(output_path(g, "events"));
    bell::io::write_events(es, streams, meta, format_of(g));
  }
  std::cout << "window        retained   S          se\n";
  for (const auto& row : rows)
    std::cout << bell::io::format_double(row.window) << "  "
              << bell::io::format_double(row.retained_fraction) << "  "
              << bell::io::format_double(row.s) << "  "
              << bell::io::format_double(row.se) << "\n";
}

struct BertrandArgs {
  std::size_t n = 1000000;
  double radius = 1.0;
};

void run_bertrand(const GlobalOptions& g, const BertrandArgs& a) {
  using bell::bertrand::Protocol;
  std::vector<std::pair<Protocol, bell::bertrand::Estimate>> rows;
  for (Protocol p : {Protocol::ParallelChords, Protocol::RandomEndpoints,
                     Protocol::RandomMidpoint}) {
    bell::RngStream rng(g.seed, static_cast<std::uint64_t>(p) + 1);
    rows.push_back({p, bell::bertrand::estimate_probability(p, a.radius, a.n,
                                                            rng)});
  }
  Meta meta = base_meta(g, "bertrand");
  meta.push_back({"n", std::to_string(a.n)});
  meta.push_back({"radius", bell::io::format_double(a.radius)});

  auto os = open_output(output_path(g, "bertrand"));
  bell::io::write_bertrand(os, rows, meta, format_of(g));
  for (const auto& [p, e] : rows)
    std::cout << bell::bertrand::protocol_name(p) << ": "
              << bell::io::format_double(e.estimate) << " +- "
              << bell::io::format_double(e.se) << " (exact "
              << bell::io::format_double(e.exact) << ")\n";
}

struct PurityArgs {
  std::vector<std::string> run_files;
  std::size_t block_length = 3;
  std::size_t resamples = 8;
  double alpha = 0.01;
  double subset_fraction = 0.2;
  std::size_t min_subset = 500;
};

void run_purity(const GlobalOptions& g, const PurityArgs& a) {
  std::vector<bell::purity::RunSeries> runs;
  for (const std::string& f : a.run_files) {
    auto is = open_input(f);
    runs.push_back(bell::io::read_run(is, fs::path(f).stem().string()));
  }
  bell::purity::PurityConfig cfg;
  cfg.block_length = a.block_length;
  cfg.resamples = a.resamples;
  cfg.alpha = a.alpha;
  cfg.subset_fraction = a.subset_fraction;
  cfg.min_subset = a.min_subset;
  bell::RngStream rng(g.seed, kCliPurityStream);
  const auto report = bell::purity::purity_test(runs, cfg, rng);

  Meta meta = base_meta(g, "purity");
  meta.push_back({"alpha", bell::io::format_double(a.alpha)});
  meta.push_back({"block_length", std::to_string(a.block_length)});
  meta.push_back({"resamples", std::to_string(a.resamples)});
  meta.push_back({"bonferroni_k", std::to_string(report.bonferroni_k)});
  meta.push_back({"pure", report.pure ? "1" : "0"});

  auto os = open_output(output_path(g, "purity"));
  if (format_of(g) == Format::Csv) {
    for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
    os << "test,statistic,dof,p_value,reject\n";
    for (const auto& t : report.tests)
      os << t.name << "," << bell::io::format_double(t.statistic) << ","
         << bell::io::format_double(t.dof) << ","
         << bell::io::format_double(t.p_value) << "," << (t.reject ? 1 : 0)
         << "\n";
  } else {
    nlohmann::json m;
    m["kind"] = "purity";
    for (const auto& [k, v] : meta) m[k] = v;
    os << m.dump() << "\n";
    for (const auto& t : report.tests) {
      nlohmann::json j;
      j["test"] = t.name;
      j["statistic"] = t.statistic;
      j["dof"] = t.dof;
      j["p_value"] = t.p_value;
      j["reject"] = t.reject;
      os << j.dump() << "\n";
    }
  }
  std::size_t rejected = 0;
  for (const auto& t : report.tests)
    if (t.reject) ++rejected;
  std::cout << "tests: " << report.tests.size() << ", rejections: "
            << rejected << " -> "
            << (report.pure ? "no mixture detected" : "mixture detected")
            << "\n";
}

struct FineArgs {
  std::string run_file;
  std::size_t max_lag = 50;
  double alpha = 0.01;
};

void run_fine_structure(const GlobalOptions& g, const FineArgs& a) {
  auto is = open_input(a.run_file);
  const auto run =
      bell::io::read_run(is, fs::path(a.run_file).stem().string());
  bell::purity::FineStructureConfig cfg;
  cfg.max_lag = a.max_lag;
  cfg.alpha = a.alpha;
  bell::RngStream rng(g.seed, kCliPurityStream);
  const auto report = bell::purity::fine_structure(run, cfg, rng);

  Meta meta = base_meta(g, "fine-structure");
  meta.push_back({"run", a.run_file});
  meta.push_back({"alpha", bell::io::format_double(a.alpha)});
  meta.push_back({"max_lag", std::to_string(a.max_lag)});
  meta.push_back({"degenerate", report.degenerate ? "1" : "0"});
  if (report.degenerate) meta.push_back({"note", report.note});
  meta.push_back({"structure_found", report.structure_found ? "1" : "0"});

  auto os = open_output(output_path(g, "fine_structure"));
  if (format_of(g) == Format::Csv) {
    for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
    os << "family,key,value,threshold,flagged\n";
    for (std::size_t k = 0; k < report.autocorrelation.size(); ++k)
      os << "autocorr," << (k + 1) << ","
         << bell::io::format_double(report.autocorrelation[k]) << ","
         << bell::io::format_double(report.band[k]) << ","
         << (std::fabs(report.autocorrelation[k]) > report.band[k] ? 1 : 0)
         << "\n";
    for (std::size_t j = 0; j < report.periodogram.size(); ++j)
      os << "periodogram," << bell::io::format_double(report.frequencies[j])
         << "," << bell::io::format_double(report.periodogram[j]) << ","
         << bell::io::format_double(report.periodogram_threshold) << ","
         << (report.periodogram[j] > report.periodogram_threshold ? 1 : 0)
         << "\n";
    if (!report.degenerate) {
      os << "runs,p_value," << bell::io::format_double(report.runs.p_value)
         << "," << bell::io::format_double(a.alpha) << ","
         << (report.runs_reject ? 1 : 0) << "\n";
      os << "waiting_ks,p_value,"
         << bell::io::format_double(report.waiting_time_ks.p_value) << ","
         << bell::io::format_double(a.alpha) << ","
         << (report.waiting_reject ? 1 : 0) << "\n";
    }
  } else {
    nlohmann::json m;
    m["kind"] = "fine_structure";
    for (const auto& [k, v] : meta) m[k] = v;
    os << m.dump() << "\n";
    for (std::size_t k = 0; k < report.autocorrelation.size(); ++k) {
      nlohmann::json j;
      j["family"] = "autocorr";
      j["key"] = k + 1;
      j["value"] = report.autocorrelation[k];
      j["threshold"] = report.band[k];
      j["flagged"] = std::fabs(report.autocorrelation[k]) > report.band[k];
      os << j.dump() << "\n";
    }
    for (std::size_t j = 0; j < report.periodogram.size(); ++j) {
      nlohmann::json jj;
      jj["family"] = "periodogram";
      jj["key"] = report.frequencies[j];
      jj["value"] = report.periodogram[j];
      jj["threshold"] = report.periodogram_threshold;
      jj["flagged"] = report.periodogram[j] > report.periodogram_threshold;
      os << jj.dump() << "\n";
    }
    if (!report.degenerate) {
      nlohmann::json j1;
      j1["family"] = "runs";
      j1["key"] = "p_value";
      j1["value"] = report.runs.p_value;
      j1["threshold"] = a.alpha;
      j1["flagged"] = report.runs_reject;
      os << j1.dump() << "\n";
      nlohmann::json j2;
      j2["family"] = "waiting_ks";
      j2["key"] = "p_value";
      j2["value"] = report.waiting_time_ks.p_value;
      j2["threshold"] = a.alpha;
      j2["flagged"] = report.waiting_reject;
      os << j2.dump() << "\n";
    }
  }
  if (report.degenerate)
    std::cout << "degenerate: " << report.note << "\n";
  else
    std::cout << "flagged lags: " << report.flagged_lags.size()
              << ", flagged frequencies: " << report.flagged_frequencies.size()
              << ", runs test " << (report.runs_reject ? "rejects" : "passes")
              << ", waiting-time test "
              << (report.waiting_reject ? "rejects" : "passes") << " -> "
              << (report.structure_found ? "structure found"
                                         : "no structure found")
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulation bench for two-arm correlation experiments: hidden-variable "
      "and quantum trial generators, CHSH estimation, count reshuffling, "
      "coincidence windows, chord-sampling protocols, and mixture tests."};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from a config file");

  GlobalOptions g;
  if (const char* env = std::getenv("BELL_LAB_OUT")) g.out_dir = env;
  app.add_option("--seed", g.seed, "Root seed for all randomness")
      ->capture_default_str();
  app.add_option("--workers", g.workers,
                 "Worker threads (never changes results)")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
  app.add_option("--format", g.format, "Output file format")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir,
                 "Output directory (default: $BELL_LAB_OUT or .)");

  const std::string angle_help =
      "Four angles a,a',b,b' in radians, or degrees with a 'd'/'deg' suffix";
  const std::string model_help =
      "Model: lrhvm | shvm | rot-chvm | quantum | shvm-boundary";

  ChshArgs chsh_args;
  auto* chsh = app.add_subcommand(
      "chsh", "Estimate S from four independently sampled setting pairs");
  chsh->fallthrough();
  chsh->add_option("--model", chsh_args.model, model_help)
      ->capture_default_str();
  chsh->add_option("--angles", chsh_args.angles, angle_help);
  chsh->add_option("--n", chsh_args.n, "Trials per setting pair")
      ->capture_default_str();
  chsh->add_flag("--save-trials", chsh_args.save_trials,
                 "Also write the per-trial outcomes");
  chsh->callback([&] { run_chsh(g, chsh_args); });

  QuadArgs quad_args;
  auto* quad = app.add_subcommand(
      "quadruples",
      "Evaluate all four settings on each emission (counterfactual models "
      "only)");
  quad->fallthrough();
  quad->add_option("--model", quad_args.model, model_help)
      ->capture_default_str();
  quad->add_option("--angles", quad_args.angles, angle_help);
  quad->add_option("--n", quad_args.n, "Rows to generate")
      ->capture_default_str();
  quad->add_flag("--save-trials", quad_args.save_trials,
                 "Also write the quadruple rows");
  quad->callback([&] { run_quadruples(g, quad_args); });

  ViolationArgs viol_args;
  auto* viol = app.add_subcommand(
      "violation-freq",
      "Fraction of replications whose estimated |S| exceeds 2");
  viol->fallthrough();
  viol->add_option("--model", viol_args.model, model_help)
      ->capture_default_str();
  viol->add_option("--angles", viol_args.angles, angle_help);
  viol->add_option("--n", viol_args.n, "Trials per setting pair per rep")
      ->capture_default_str();
  viol->add_option("--reps", viol_args.reps, "Replications")
      ->capture_default_str();
  viol->add_option("--alpha", viol_args.alpha, "Confidence level for the CI")
      ->capture_default_str();
  viol->callback([&] { run_violation_freq(g, viol_args); });

  CouplingArgs coup_args;
  auto* coup = app.add_subcommand(
      "coupling", "Check recorded sheets against a model's own marginals");
  coup->fallthrough();
  coup->add_option("--model", coup_args.model, model_help)
      ->capture_default_str();
  coup->add_option("--angles", coup_args.angles, angle_help);
  coup->add_option("--trials", coup_args.trials_file,
                   "Read a pair-trials file instead of simulating");
  coup->add_option("--n", coup_args.n, "Trials per setting pair (simulated)")
      ->capture_default_str();
  coup->add_option("--alpha", coup_args.alpha, "Family-wise test level")
      ->capture_default_str();
  coup->callback([&] { run_coupling(g, coup_args); });

  ReshuffleArgs resh_args;
  auto* resh = app.add_subcommand(
      "reshuffle",
      "Decide whether four pair-count tables admit one quadruple table");
  resh->fallthrough();
  resh->add_option("--counts", resh_args.counts_file,
                   "Read a counts file (setting_pair,a,b,count)");
  resh->add_option("--quadruples", resh_args.quadruples_file,
                   "Derive counts from a quadruples file");
  resh->add_option("--model", resh_args.model,
                   model_help + " (simulated when no file is given)")
      ->capture_default_str();
  resh->add_option("--angles", resh_args.angles, angle_help);
  resh->add_option("--n", resh_args.n, "Trials per setting pair (simulated)")
      ->capture_default_str();
  resh->callback([&] { run_reshuffle(g, resh_args); });

  CoincidenceArgs coin_args;
  auto* coin = app.add_subcommand(
      "coincidence",
      "CHSH estimates from time-window coincidence pairing, per window");
  coin->fallthrough();
  coin->add_option("--windows", coin_args.windows,
                   "Comma-separated window widths in seconds")
      ->capture_default_str();
  coin->add_option("--angles", coin_args.angles, angle_help);
  coin->add_option("--mode", coin_args.mode, "Pairing rule")
      ->check(CLI::IsMember({"nearest", "fixed"}))
      ->capture_default_str();
  coin->add_option("--n", coin_args.n, "Emissions to simulate")
      ->capture_default_str();
  coin->add_flag("--null", coin_args.null_delays,
                 "Use setting-independent delays");
  coin->add_flag("--save-events", coin_args.save_events,
                 "Also write the raw detection events");
  coin->callback([&] { run_coincidence(g, coin_args); });

  BertrandArgs bert_args;
  auto* bert = app.add_subcommand(
      "bertrand", "Chord-through-inner-circle probability, three protocols");
  bert->fallthrough();
  bert->add_option("--n", bert_args.n, "Chords per protocol")
      ->capture_default_str();
  bert->add_option("--radius", bert_args.radius, "Outer circle radius")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bert->callback([&] { run_bertrand(g, bert_args); });

  PurityArgs pur_args;
  auto* pur = app.add_subcommand(
      "purity", "Test recorded runs for mixing of several distributions");
  pur->fallthrough();
  pur->add_option("--runs", pur_args.run_files,
                  "Run files (trial,outcome), one per run")
      ->required()
      ->expected(1, 64);
  pur->add_option("--block-length", pur_args.block_length,
                  "Block length for the tuple-frequency test")
      ->capture_default_str();
  pur->add_option("--resamples", pur_args.resamples,
                  "Random subsets per run and mode")
      ->capture_default_str();
  pur->add_option("--alpha", pur_args.alpha, "Family-wise test level")
      ->capture_default_str();
  pur->add_option("--subset-fraction", pur_args.subset_fraction,
                  "Fraction of a run per subset")
      ->capture_default_str();
  pur->add_option("--min-subset", pur_args.min_subset, "Minimum subset size")
      ->capture_default_str();
  pur->callback([&] { run_purity(g, pur_args); });

  FineArgs fine_args;
  auto* fine = app.add_subcommand(
      "fine-structure",
      "Look inside one run for serial structure and periodicity");
  fine->fallthrough();
  fine->add_option("--run", fine_args.run_file, "Run file (trial,outcome)")
      ->required();
  fine->add_option("--max-lag", fine_args.max_lag, "Highest lag to test")
      ->capture_default_str();
  fine->add_option("--alpha", fine_args.alpha, "Per-family test level")
      ->capture_default_str();
  fine->callback([&] { run_fine_structure(g, fine_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const bell::internal_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const bell::stat_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const bell::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const bell::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
