#include "bell/bertrand.hpp"

#include <cmath>

#include "bell/errors.hpp"

namespace bell::bertrand {

namespace {
// A chord crosses the inner circle iff its distance from the center is
// strictly below 1/2 (unit outer radius).
constexpr double kInner = 0.5;
}  // namespace

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::ParallelChords: return "parallel_chords";
    case Protocol::RandomEndpoints: return "random_endpoints";
    case Protocol::RandomMidpoint: return "random_midpoint";
  }
  return "?";
}

Rational exact_probability(Protocol p) {
  switch (p) {
    case Protocol::ParallelChords: return {1, 2};
    case Protocol::RandomEndpoints: return {1, 3};
    case Protocol::RandomMidpoint: return {1, 4};
  }
  throw input_error("unknown protocol");
}

ChordSample sample_chord(Protocol protocol, double radius, RngStream& rng) {
  if (!(radius > 0.0)) throw input_error("radius must be positive");
  ChordSample s;
  switch (protocol) {
    case Protocol::ParallelChords: {
      // Signed offset of a vertical chord, uniform across the diameter.
      const double d = 2.0 * rng.next_unit() - 1.0;
      const double h = std::sqrt(std::max(0.0, 1.0 - d * d));
      s.p1 = {d, h};
      s.p2 = {d, -h};
      s.hits_inner = std::fabs(d) < kInner;
      break;
    }
    case Protocol::RandomEndpoints: {
      const double phi1 = rng.next_angle();
      const double phi2 = rng.next_angle();
      s.p1 = {std::cos(phi1), std::sin(phi1)};
      s.p2 = {std::cos(phi2), std::sin(phi2)};
      const double dist = std::fabs(std::cos(0.5 * (phi1 - phi2)));
      s.hits_inner = dist < kInner;
      break;
    }
    case Protocol::RandomMidpoint: {
      // Midpoint uniform over the disk; the chord is perpendicular to
      // the radius through it.
      const double r = std::sqrt(rng.next_unit());
      const double phi = rng.next_angle();
      const Eigen::Vector2d mid{r * std::cos(phi), r * std::sin(phi)};
      const Eigen::Vector2d perp{-std::sin(phi), std::cos(phi)};
      const double h = std::sqrt(std::max(0.0, 1.0 - r * r));
      s.p1 = mid + h * perp;
      s.p2 = mid - h * perp;
      s.hits_inner = r < kInner;
      break;
    }
  }
  s.p1 *= radius;
  s.p2 *= radius;
  return s;
}

Estimate estimate_probability(Protocol protocol, double radius, std::size_t n,
                              RngStream& rng) {
  if (n == 0) throw input_error("n must be positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (sample_chord(protocol, radius, rng).hits_inner) ++hits;
  Estimate e;
  e.n = n;
  e.estimate = static_cast<double>(hits) / static_cast<double>(n);
  e.se = std::sqrt(e.estimate * (1.0 - e.estimate) / static_cast<double>(n));
  e.exact = exact_probability(protocol).value();
  return e;
}

}  // namespace bell::bertrand
