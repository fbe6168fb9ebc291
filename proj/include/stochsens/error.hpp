#pragma once

#include <stdexcept>
#include <string>

namespace stochsens {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed model: parse failures, dangling species/parameter references,
// negative counts or rates.
class ModelError : public Error {
 public:
  using Error::Error;
};

// An estimator was asked to do something it mathematically cannot, e.g.
// the likelihood-ratio weight at a zero rate constant.
class InapplicableError : public Error {
 public:
  using Error::Error;
};

// Runtime failure while generating a path (jump cap exceeded, state left
// the non-negative lattice).
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace stochsens
