#pragma once

#include <stdexcept>
#include <string>

namespace orderplan {

// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An id or position outside the valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed corpus, table or target data. Carries file/line context in the message.
class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient, divergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace orderplan
