#include "bell/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "bell/errors.hpp"

namespace bell::coincidence {

namespace {

constexpr std::uint64_t kEventStream = 0x65767473ULL;
constexpr std::uint64_t kScheduleStream = 0x73636864ULL;
constexpr double kReferenceRate = 1000.0;
// Shorter than half the emission spacing, so detections of one emission
// never interleave with the next.
constexpr double kReferenceMaxDelay = 0.4 / kReferenceRate;

bool event_before(const DetectionEvent& lhs, const DetectionEvent& rhs) {
  if (lhs.t != rhs.t) return lhs.t < rhs.t;
  if (lhs.trial_id != rhs.trial_id) return lhs.trial_id < rhs.trial_id;
  return lhs.arm < rhs.arm;
}

}  // namespace

DelayModel reference_delay_model() {
  return DelayModel{
      kReferenceRate, kReferenceMaxDelay,
      [](double lambda, double theta, int, double u) {
        const double s = std::sin(theta - lambda);
        return kReferenceMaxDelay * u * (s * s) * (s * s);
      },
      models::ModelSpec::lrhvm_reference()};
}

DelayModel setting_independent_delay_model() {
  return DelayModel{kReferenceRate, kReferenceMaxDelay,
                    [](double, double, int, double u) {
                      return kReferenceMaxDelay * u;
                    },
                    models::ModelSpec::lrhvm_reference()};
}

Streams generate_event_streams(const DelayModel& delay_model,
                               const std::vector<models::SettingPair>& schedule,
                               std::uint64_t seed) {
  if (schedule.empty()) throw input_error("schedule is empty");
  if (!(delay_model.rate > 0.0)) throw input_error("rate must be positive");
  if (!(delay_model.max_delay >= 0.0))
    throw input_error("max_delay must be nonnegative");
  if (!delay_model.delay) throw input_error("delay function not set");
  if (!delay_model.model.traces_hidden_state())
    throw input_error("delay model needs a traced outcome model");

  Streams streams;
  streams.n_trials = schedule.size();
  streams.alice.reserve(schedule.size());
  streams.bob.reserve(schedule.size());
  const double spacing = 1.0 / delay_model.rate;
  RngStream root(seed, kEventStream);
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const models::SettingPair& pair = schedule[i];
    RngStream ts = root.substream(i);
    const models::TrialOutcome o = delay_model.model.sample_trial(pair, ts);
    const double ua = ts.next_unit();
    const double ub = ts.next_unit();
    const double da =
        delay_model.delay(o.trace.lambda1, pair.theta_x, o.a, ua);
    const double db =
        delay_model.delay(o.trace.lambda2, pair.theta_y, o.b, ub);
    if (!(da >= 0.0) || da > delay_model.max_delay || !(db >= 0.0) ||
        db > delay_model.max_delay)
      throw config_error("delay outside [0, max_delay]");
    const double te = static_cast<double>(i) * spacing;
    streams.alice.push_back({te + da, 0, static_cast<std::int8_t>(pair.x),
                             pair.theta_x, static_cast<std::int8_t>(o.a), i});
    streams.bob.push_back({te + db, 1, static_cast<std::int8_t>(pair.y),
                           pair.theta_y, static_cast<std::int8_t>(o.b), i});
  }
  std::sort(streams.alice.begin(), streams.alice.end(), event_before);
  std::sort(streams.bob.begin(), streams.bob.end(), event_before);
  return streams;
}

PairedTrials pair_coincidences(const Streams& streams,
                               const WindowPolicy& policy,
                               const models::Design& design) {
  if (!(policy.window > 0.0)) throw input_error("window must be positive");
  PairedTrials out;
  const auto pairs = design.all_pairs();
  for (int i = 0; i < 4; ++i) out.sheets[i].pair = pairs[i];

  const auto record = [&](const DetectionEvent& ea, const DetectionEvent& eb) {
    experiment::PairSheet& sheet =
        out.sheets[ea.setting_label * 2 + eb.setting_label];
    sheet.a.push_back(ea.outcome);
    sheet.b.push_back(eb.outcome);
    ++out.paired;
  };

  if (policy.mode == PairingMode::NearestNeighbor) {
    std::deque<DetectionEvent> pending_a, pending_b;
    std::size_t ia = 0, ib = 0;
    const double w = policy.window;
    while (ia < streams.alice.size() || ib < streams.bob.size()) {
      const bool take_a =
          ib >= streams.bob.size() ||
          (ia < streams.alice.size() &&
           event_before(streams.alice[ia], streams.bob[ib]));
      const DetectionEvent& e = take_a ? streams.alice[ia] : streams.bob[ib];
      while (!pending_a.empty() && pending_a.front().t < e.t - w) {
        pending_a.pop_front();
        ++out.discarded_a;
      }
      while (!pending_b.empty() && pending_b.front().t < e.t - w) {
        pending_b.pop_front();
        ++out.discarded_b;
      }
      if (take_a) {
        if (!pending_b.empty()) {
          record(e, pending_b.front());
          pending_b.pop_front();
        } else {
          pending_a.push_back(e);
        }
        ++ia;
      } else {
        if (!pending_a.empty()) {
          record(pending_a.front(), e);
          pending_a.pop_front();
        } else {
          pending_b.push_back(e);
        }
        ++ib;
      }
    }
    out.discarded_a += pending_a.size();
    out.discarded_b += pending_b.size();
    return out;
  }

  // FixedBins: both streams are time-sorted, so bins appear in order.
  const double w = policy.window;
  std::size_t ia = 0, ib = 0;
  const auto bin_of = [w](const DetectionEvent& e) {
    return static_cast<long long>(std::floor(e.t / w));
  };
  while (ia < streams.alice.size() || ib < streams.bob.size()) {
    long long bin;
    if (ia >= streams.alice.size())
      bin = bin_of(streams.bob[ib]);
    else if (ib >= streams.bob.size())
      bin = bin_of(streams.alice[ia]);
    else
      bin = std::min(bin_of(streams.alice[ia]), bin_of(streams.bob[ib]));
    const std::size_t a0 = ia, b0 = ib;
    while (ia < streams.alice.size() && bin_of(streams.alice[ia]) == bin) ++ia;
    while (ib < streams.bob.size() && bin_of(streams.bob[ib]) == bin) ++ib;
    const std::size_t na = ia - a0, nb = ib - b0;
    const std::size_t k = std::min(na, nb);
    for (std::size_t j = 0; j < k; ++j)
      record(streams.alice[a0 + j], streams.bob[b0 + j]);
    out.discarded_a += na - k;
    out.discarded_b += nb - k;
  }
  return out;
}

std::vector<ScanRow> coincidence_chsh_scan(const DelayModel& delay_model,
                                           const models::Design& design,
                                           std::size_t n_trials,
                                           const std::vector<double>& windows,
                                           PairingMode mode,
                                           std::uint64_t seed) {
  if (n_trials == 0) throw input_error("n_trials must be positive");
  if (windows.empty()) throw input_error("no windows given");

  std::vector<models::SettingPair> schedule;
  schedule.reserve(n_trials);
  RngStream sched_root(seed, kScheduleStream);
  for (std::size_t i = 0; i < n_trials; ++i) {
    RngStream ts = sched_root.substream(i);
    const int x = static_cast<int>(ts.next_u64() >> 63);
    const int y = static_cast<int>(ts.next_u64() >> 63);
    schedule.push_back(design.pair(x, y));
  }
  const Streams streams = generate_event_streams(delay_model, schedule, seed);

  std::vector<ScanRow> rows;
  rows.reserve(windows.size());
  for (double w : windows) {
    const PairedTrials paired =
        pair_coincidences(streams, WindowPolicy{mode, w}, design);
    ScanRow row;
    row.window = w;
    row.retained_fraction =
        static_cast<double>(paired.paired) / static_cast<double>(n_trials);
    const bool any_empty =
        std::any_of(paired.sheets.begin(), paired.sheets.end(),
                    [](const experiment::PairSheet& s) { return s.n() == 0; });
    if (any_empty) {
      row.s = std::numeric_limits<double>::quiet_NaN();
      row.se = std::numeric_limits<double>::quiet_NaN();
    } else {
      experiment::PairExperiment ex{design, paired.sheets};
      const experiment::ChshReport rep = experiment::chsh_from_pairs(ex);
      row.s = rep.s;
      row.se = rep.se;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace bell::coincidence
