#pragma once

#include <stdexcept>
#include <string>

namespace lumber {

/// Input data or configuration violates a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A density or gradient evaluation produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sampler finished but the run is not trustworthy (excess divergences).
class SamplerFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lumber
