#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

#include "bell/rng.hpp"

namespace bell::bertrand {

// Three ways to draw a "random chord" of a circle of radius R. The target
// event is the chord crossing the concentric circle of radius R/2; each
// protocol gives it a different, exactly known probability.
enum class Protocol { ParallelChords, RandomEndpoints, RandomMidpoint };

const char* protocol_name(Protocol p);

struct Rational {
  long num = 0;
  long den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

// 1/2, 1/3, 1/4 in protocol order above.
Rational exact_probability(Protocol p);

struct ChordSample {
  Eigen::Vector2d p1;
  Eigen::Vector2d p2;
  bool hits_inner = false;  // tangency counts as a miss
};

// Draws are made at unit radius and scaled afterwards, so the hit
// sequence for a given stream does not depend on R.
ChordSample sample_chord(Protocol protocol, double radius, RngStream& rng);

struct Estimate {
  std::size_t n = 0;
  double estimate = 0.0;
  double se = 0.0;
  double exact = 0.0;
};

Estimate estimate_probability(Protocol protocol, double radius, std::size_t n,
                              RngStream& rng);

}  // namespace bell::bertrand
