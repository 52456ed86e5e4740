#pragma once

#include <stdexcept>
#include <string>

namespace idslab {

// Shape disagreement between a model, a feature vector or a batch.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A correlation was requested over a constant sequence.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Configuration rejected before any work is done.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace idslab
