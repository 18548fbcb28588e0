#include "bell/csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "bell/errors.hpp"

namespace bell::io {

namespace {

using nlohmann::json;

const char* kPairHeader = "trial,setting_x,setting_y,a,b";
const char* kQuadHeader = "trial,a,a_prime,b,b_prime";
const char* kCountsHeader = "setting_pair,a,b,count";
const char* kEventsHeader = "t,arm,setting,outcome,trial_id";
const char* kScanHeader = "window,retained_fraction,S,se";
const char* kRunHeader = "trial,outcome";
const char* kBertrandHeader = "protocol,n,estimate,se,exact";

const char* kXLabels[2] = {"x", "x'"};
const char* kYLabels[2] = {"y", "y'"};
const char* kPairLabels[4] = {"xy", "xy'", "x'y", "x'y'"};

void write_meta_csv(std::ostream& os, const Meta& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
}

void write_meta_jsonl(std::ostream& os, const Meta& meta, const char* kind) {
  json j;
  j["kind"] = kind;
  for (const auto& [k, v] : meta) j[k] = v;
  os << j.dump() << "\n";
}

struct LineReader {
  std::istream& is;
  std::size_t line_no = 0;

  bool next(std::string& line) {
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw input_error("line " + std::to_string(line_no) + ": " + what);
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
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

void expect_header(LineReader& r, const char* header) {
  std::string line;
  if (!r.next(line)) r.fail(std::string("missing header '") + header + "'");
  if (line != header)
    r.fail("header mismatch: got '" + line + "', want '" + header + "'");
}

long parse_long(const LineReader& r, const std::string& s) {
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw input_error("line " + std::to_string(r.line_no) +
                      ": bad integer '" + s + "'");
  return v;
}

int parse_outcome(const LineReader& r, const std::string& s) {
  const long v = parse_long(r, s);
  if (v != 1 && v != -1)
    throw input_error("line " + std::to_string(r.line_no) +
                      ": outcome must be 1 or -1, got '" + s + "'");
  return static_cast<int>(v);
}

int label_index(const LineReader& r, const std::string& s,
                const char* const labels[2]) {
  if (s == labels[0]) return 0;
  if (s == labels[1]) return 1;
  throw input_error("line " + std::to_string(r.line_no) +
                    ": unknown setting label '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_pair_experiment(std::ostream& os,
                           const experiment::PairExperiment& ex,
                           const Meta& meta, Format format) {
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    os << kPairHeader << "\n";
    std::size_t trial = 0;
    for (int i = 0; i < 4; ++i) {
      const experiment::PairSheet& s = ex.sheets[i];
      for (std::size_t t = 0; t < s.n(); ++t)
        os << trial++ << "," << kXLabels[s.pair.x] << ","
           << kYLabels[s.pair.y] << "," << int(s.a[t]) << "," << int(s.b[t])
           << "\n";
    }
    return;
  }
  write_meta_jsonl(os, meta, "pair_experiment");
  std::size_t trial = 0;
  for (int i = 0; i < 4; ++i) {
    const experiment::PairSheet& s = ex.sheets[i];
    for (std::size_t t = 0; t < s.n(); ++t) {
      json j;
      j["trial"] = trial++;
      j["setting_x"] = kXLabels[s.pair.x];
      j["setting_y"] = kYLabels[s.pair.y];
      j["a"] = int(s.a[t]);
      j["b"] = int(s.b[t]);
      os << j.dump() << "\n";
    }
  }
}

experiment::PairExperiment read_pair_experiment(std::istream& is,
                                                const models::Design& design) {
  LineReader r{is};
  expect_header(r, kPairHeader);
  experiment::PairExperiment ex;
  ex.design = design;
  const auto pairs = design.all_pairs();
  for (int i = 0; i < 4; ++i) ex.sheets[i].pair = pairs[i];
  std::string line;
  while (r.next(line)) {
    const auto cols = split(line);
    if (cols.size() != 5) r.fail("expected 5 columns");
    const int x = label_index(r, cols[1], kXLabels);
    const int y = label_index(r, cols[2], kYLabels);
    experiment::PairSheet& sheet = ex.sheets[x * 2 + y];
    sheet.a.push_back(static_cast<std::int8_t>(parse_outcome(r, cols[3])));
    sheet.b.push_back(static_cast<std::int8_t>(parse_outcome(r, cols[4])));
  }
  return ex;
}

void write_quadruples(std::ostream& os, const experiment::QuadrupleSheet& sheet,
                      const Meta& meta, Format format) {
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    os << kQuadHeader << "\n";
    for (std::size_t t = 0; t < sheet.rows.size(); ++t) {
      const auto& row = sheet.rows[t];
      os << t << "," << int(row[0]) << "," << int(row[1]) << ","
         << int(row[2]) << "," << int(row[3]) << "\n";
    }
    return;
  }
  write_meta_jsonl(os, meta, "quadruples");
  for (std::size_t t = 0; t < sheet.rows.size(); ++t) {
    const auto& row = sheet.rows[t];
    json j;
    j["trial"] = t;
    j["a"] = int(row[0]);
    j["a_prime"] = int(row[1]);
    j["b"] = int(row[2]);
    j["b_prime"] = int(row[3]);
    os << j.dump() << "\n";
  }
}

experiment::QuadrupleSheet read_quadruples(std::istream& is,
                                           const models::Design& design) {
  LineReader r{is};
  expect_header(r, kQuadHeader);
  experiment::QuadrupleSheet sheet;
  sheet.design = design;
  std::string line;
  while (r.next(line)) {
    const auto cols = split(line);
    if (cols.size() != 5) r.fail("expected 5 columns");
    std::array<std::int8_t, 4> row;
    for (int k = 0; k < 4; ++k)
      row[k] = static_cast<std::int8_t>(parse_outcome(r, cols[k + 1]));
    sheet.rows.push_back(row);
  }
  return sheet;
}

void write_counts(std::ostream& os, const reshuffle::CountTable& counts,
                  const Meta& meta, Format format) {
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    os << kCountsHeader << "\n";
    for (int i = 0; i < 4; ++i)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          os << kPairLabels[i] << "," << (1 - 2 * a) << "," << (1 - 2 * b)
             << "," << counts.tables[i][a][b] << "\n";
    return;
  }
  write_meta_jsonl(os, meta, "counts");
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        json j;
        j["setting_pair"] = kPairLabels[i];
        j["a"] = 1 - 2 * a;
        j["b"] = 1 - 2 * b;
        j["count"] = counts.tables[i][a][b];
        os << j.dump() << "\n";
      }
}

reshuffle::CountTable read_counts(std::istream& is) {
  LineReader r{is};
  expect_header(r, kCountsHeader);
  reshuffle::CountTable counts;
  std::string line;
  while (r.next(line)) {
    const auto cols = split(line);
    if (cols.size() != 4) r.fail("expected 4 columns");
    int idx = -1;
    for (int i = 0; i < 4; ++i)
      if (cols[0] == kPairLabels[i]) idx = i;
    if (idx < 0) r.fail("unknown setting pair '" + cols[0] + "'");
    const int a = parse_outcome(r, cols[1]) == 1 ? 0 : 1;
    const int b = parse_outcome(r, cols[2]) == 1 ? 0 : 1;
    const long c = parse_long(r, cols[3]);
    if (c < 0) r.fail("negative count");
    counts.tables[idx][a][b] += c;
  }
  return counts;
}

void write_events(std::ostream& os, const coincidence::Streams& streams,
                  const Meta& meta, Format format) {
  std::vector<const coincidence::DetectionEvent*> merged;
  merged.reserve(streams.alice.size() + streams.bob.size());
  for (const auto& e : streams.alice) merged.push_back(&e);
  for (const auto& e : streams.bob) merged.push_back(&e);
  std::sort(merged.begin(), merged.end(),
            [](const coincidence::DetectionEvent* lhs,
               const coincidence::DetectionEvent* rhs) {
              if (lhs->t != rhs->t) return lhs->t < rhs->t;
              if (lhs->trial_id != rhs->trial_id)
                return lhs->trial_id < rhs->trial_id;
              return lhs->arm < rhs->arm;
            });
  const auto setting_of = [](const coincidence::DetectionEvent& e) {
    return e.arm == 0 ? kXLabels[e.setting_label] : kYLabels[e.setting_label];
  };
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    os << kEventsHeader << "\n";
    for (const auto* e : merged)
      os << format_double(e->t) << "," << (e->arm == 0 ? "A" : "B") << ","
         << setting_of(*e) << "," << int(e->outcome) << "," << e->trial_id
         << "\n";
    return;
  }
  write_meta_jsonl(os, meta, "events");
  for (const auto* e : merged) {
    json j;
    j["t"] = e->t;
    j["arm"] = e->arm == 0 ? "A" : "B";
    j["setting"] = setting_of(*e);
    j["outcome"] = int(e->outcome);
    j["trial_id"] = e->trial_id;
    os << j.dump() << "\n";
  }
}

void write_scan(std::ostream& os, const std::vector<coincidence::ScanRow>& rows,
                const Meta& meta, Format format) {
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    os << kScanHeader << "\n";
    for (const auto& row : rows)
      os << format_double(row.window) << ","
         << format_double(row.retained_fraction) << ","
         << format_double(row.s) << "," << format_double(row.se) << "\n";
    return;
  }
  write_meta_jsonl(os, meta, "scan");
  for (const auto& row : rows) {
    json j;
    j["window"] = row.window;
    j["retained_fraction"] = row.retained_fraction;
    j["S"] = row.s;
    j["se"] = row.se;
    os << j.dump() << "\n";
  }
}

void write_run(std::ostream& os, const purity::RunSeries& run,
               const Meta& meta, Format format) {
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    os << kRunHeader << "\n";
    for (std::size_t t = 0; t < run.outcomes.size(); ++t)
      os << t << "," << run.outcomes[t] << "\n";
    return;
  }
  write_meta_jsonl(os, meta, "run");
  for (std::size_t t = 0; t < run.outcomes.size(); ++t) {
    json j;
    j["trial"] = t;
    j["outcome"] = run.outcomes[t];
    os << j.dump() << "\n";
  }
}

purity::RunSeries read_run(std::istream& is, std::string run_id) {
  LineReader r{is};
  expect_header(r, kRunHeader);
  purity::RunSeries run;
  run.run_id = std::move(run_id);
  std::string line;
  while (r.next(line)) {
    const auto cols = split(line);
    if (cols.size() != 2) r.fail("expected 2 columns");
    run.outcomes.push_back(static_cast<int>(parse_long(r, cols[1])));
  }
  return run;
}

void write_bertrand(
    std::ostream& os,
    const std::vector<std::pair<bertrand::Protocol, bertrand::Estimate>>& rows,
    const Meta& meta, Format format) {
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    os << kBertrandHeader << "\n";
    for (const auto& [p, e] : rows)
      os << bertrand::protocol_name(p) << "," << e.n << ","
         << format_double(e.estimate) << "," << format_double(e.se) << ","
         << format_double(e.exact) << "\n";
    return;
  }
  write_meta_jsonl(os, meta, "bertrand");
  for (const auto& [p, e] : rows) {
    json j;
    j["protocol"] = bertrand::protocol_name(p);
    j["n"] = e.n;
    j["estimate"] = e.estimate;
    j["se"] = e.se;
    j["exact"] = e.exact;
    os << j.dump() << "\n";
  }
}

void write_chsh_report(std::ostream& os, const experiment::ChshReport& report,
                       const Meta& meta, Format format) {
  static const char* kCols[4] = {"xy", "xyp", "xpy", "xpyp"};
  if (format == Format::Csv) {
    write_meta_csv(os, meta);
    for (int i = 0; i < 4; ++i) os << "E_" << kCols[i] << ",";
    for (int i = 0; i < 4; ++i) os << "se_" << kCols[i] << ",";
    os << "S,se_S,violated\n";
    for (int i = 0; i < 4; ++i) os << format_double(report.pairs[i].e) << ",";
    for (int i = 0; i < 4; ++i) os << format_double(report.pairs[i].se) << ",";
    os << format_double(report.s) << "," << format_double(report.se) << ","
       << (report.violates_classical_bound ? 1 : 0) << "\n";
    return;
  }
  write_meta_jsonl(os, meta, "chsh");
  json j;
  for (int i = 0; i < 4; ++i) {
    j[std::string("E_") + kCols[i]] = report.pairs[i].e;
    j[std::string("se_") + kCols[i]] = report.pairs[i].se;
  }
  j["S"] = report.s;
  j["se_S"] = report.se;
  j["violated"] = report.violates_classical_bound;
  os << j.dump() << "\n";
}

}  // namespace bell::io
