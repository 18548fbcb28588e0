#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bell/experiment.hpp"
#include "bell/models.hpp"

namespace bell::coincidence {

struct DetectionEvent {
  double t = 0.0;       // detection time, seconds
  std::int8_t arm = 0;  // 0 = A side, 1 = B side
  std::int8_t setting_label = 0;
  double setting_angle = 0.0;
  std::int8_t outcome = 0;
  std::uint64_t trial_id = 0;
};

// Sorted by (t, trial_id, arm).
using EventStream = std::vector<DetectionEvent>;

struct Streams {
  EventStream alice;
  EventStream bob;
  std::size_t n_trials = 0;
};

enum class PairingMode { FixedBins, NearestNeighbor };

struct WindowPolicy {
  PairingMode mode = PairingMode::NearestNeighbor;
  double window = 0.0;  // seconds, must be positive
};

// Detection-time model layered on a traced outcome model: every emission
// produces one event per arm, shifted by delay(lambda_arm, theta_arm,
// outcome, u) with its own uniform u. Delays must land in [0, max_delay].
struct DelayModel {
  double rate = 0.0;  // emissions per second, equally spaced
  double max_delay = 0.0;
  std::function<double(double lambda, double theta, int outcome, double u)>
      delay;
  models::ModelSpec model;
};

// Delay grows with the angle between analyzer and hidden orientation, so
// the retained subensemble depends on the local setting. Tuned so narrow
// windows push |S| well past 2 while wide windows recover the full model.
DelayModel reference_delay_model();
// Same marginal delay law but blind to settings; retained subensembles
// stay fair samples at every window.
DelayModel setting_independent_delay_model();

Streams generate_event_streams(const DelayModel& delay_model,
                               const std::vector<models::SettingPair>& schedule,
                               std::uint64_t seed);

struct PairedTrials {
  std::array<experiment::PairSheet, 4> sheets;
  std::size_t paired = 0;
  std::size_t discarded_a = 0;
  std::size_t discarded_b = 0;
};

// Matches A-side and B-side detections into coincidences. NearestNeighbor
// walks both streams in time order and pairs each event with the earliest
// unmatched opposite event within the window; FixedBins pairs the k-th A
// with the k-th B inside each absolute time bin of the window width.
PairedTrials pair_coincidences(const Streams& streams,
                               const WindowPolicy& policy,
                               const models::Design& design);

struct ScanRow {
  double window = 0.0;
  double retained_fraction = 0.0;
  double s = 0.0;  // NaN when some context received no coincidences
  double se = 0.0;
};

// One event set, evaluated at each window width.
std::vector<ScanRow> coincidence_chsh_scan(const DelayModel& delay_model,
                                           const models::Design& design,
                                           std::size_t n_trials,
                                           const std::vector<double>& windows,
                                           PairingMode mode,
                                           std::uint64_t seed);

}  // namespace bell::coincidence
