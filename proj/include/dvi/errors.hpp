#pragma once

#include <stdexcept>
#include <string>

namespace dvi {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// q places mass where the reference distribution has none.
class SupportViolation : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

// All joint prior*likelihood weights vanished.
class ZeroEvidence : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// An enumeration guard tripped (grid / sequence space too big).
class TooLarge : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class InvalidDistribution : public Error {
 public:
  using Error::Error;
};

// Forward filter lost all belief mass.
class ZeroLikelihoodPrefix : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Base for iterative solvers that hit their iteration cap. Concrete
// subclasses carry the best-so-far result for --allow-partial flows.
class NotConverged : public Error {
 public:
  using Error::Error;
};

}  // namespace dvi
