#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bell {

// Bad caller-supplied data: malformed tables, invalid angles, non-states.
struct input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inconsistent or unusable configuration (CLI / config file / model knobs).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A statistical procedure was asked for more resolution than the sample
// supports. Carries the smallest sample size that would be accepted.
struct stat_error : std::runtime_error {
  stat_error(const std::string& msg, std::size_t required_n_)
      : std::runtime_error(msg + " (need n >= " + std::to_string(required_n_) + ")"),
        required_n(required_n_) {}
  std::size_t required_n;
};

// A broken internal invariant; never expected on valid inputs.
struct internal_error : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace bell
