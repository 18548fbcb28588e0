#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "bell/bertrand.hpp"
#include "bell/coincidence.hpp"
#include "bell/experiment.hpp"
#include "bell/purity.hpp"
#include "bell/reshuffle.hpp"

namespace bell::io {

enum class Format { Csv, Jsonl };

// Echoed verbatim at the top of every output: "# key=value" lines in CSV,
// one leading meta object in JSONL.
using Meta = std::vector<std::pair<std::string, std::string>>;

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Columns: trial,setting_x,setting_y,a,b with labels x|x' and y|y'.
void write_pair_experiment(std::ostream& os,
                           const experiment::PairExperiment& ex,
                           const Meta& meta, Format format);
// The file carries labels only; the caller supplies the angles.
experiment::PairExperiment read_pair_experiment(std::istream& is,
                                                const models::Design& design);

// Columns: trial,a,a_prime,b,b_prime.
void write_quadruples(std::ostream& os, const experiment::QuadrupleSheet& sheet,
                      const Meta& meta, Format format);
experiment::QuadrupleSheet read_quadruples(std::istream& is,
                                           const models::Design& design);

// Columns: setting_pair,a,b,count with pair labels xy, xy', x'y, x'y'.
void write_counts(std::ostream& os, const reshuffle::CountTable& counts,
                  const Meta& meta, Format format);
reshuffle::CountTable read_counts(std::istream& is);

// Columns: t,arm,setting,outcome,trial_id, merged across arms in time order.
void write_events(std::ostream& os, const coincidence::Streams& streams,
                  const Meta& meta, Format format);

// Columns: window,retained_fraction,S,se.
void write_scan(std::ostream& os, const std::vector<coincidence::ScanRow>& rows,
                const Meta& meta, Format format);

// Columns: trial,outcome.
void write_run(std::ostream& os, const purity::RunSeries& run,
               const Meta& meta, Format format);
purity::RunSeries read_run(std::istream& is, std::string run_id);

// Columns: protocol,n,estimate,se,exact.
void write_bertrand(
    std::ostream& os,
    const std::vector<std::pair<bertrand::Protocol, bertrand::Estimate>>& rows,
    const Meta& meta, Format format);

// One row: the four correlations, their errors, S, its error, and the
// strict |S| > 2 flag.
void write_chsh_report(std::ostream& os, const experiment::ChshReport& report,
                       const Meta& meta, Format format);

}  // namespace bell::io
