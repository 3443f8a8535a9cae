#pragma once

#include <stdexcept>
#include <string>

namespace lvae {

// Shape disagreement between operands; the message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration or arguments (empty dataset, bad split, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Model missing or unusable for the requested operation.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Training stopped by a cancellation request.
class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("training cancelled") {}
};

}  // namespace lvae
