#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qscat {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

class SpecMismatch : public Error {
 public:
  using Error::Error;
};

class SupportMismatch : public Error {
 public:
  using Error::Error;
};

class DegenerateDistribution : public Error {
 public:
  using Error::Error;
};

class UnsupportedDegeneracy : public Error {
 public:
  using Error::Error;
};

class NoOpenChannels : public Error {
 public:
  explicit NoOpenChannels(double energy)
      : Error("no open channel at total energy " + std::to_string(energy)),
        energy_(energy) {}
  double energy() const { return energy_; }

 private:
  double energy_;
};

// Total energy within the threshold guard of a level; the flux normalization
// 1/sqrt(k) is singular there.
class ThresholdError : public Error {
 public:
  ThresholdError(double energy, std::size_t level)
      : Error("total energy " + std::to_string(energy) +
              " is within the threshold guard of level " +
              std::to_string(level)),
        energy_(energy),
        level_(level) {}
  double energy() const { return energy_; }
  std::size_t level() const { return level_; }

 private:
  double energy_;
  std::size_t level_;
};

class CompositionError : public Error {
 public:
  CompositionError(std::size_t slice, double rcond)
      : Error("ill-conditioned scattering-matrix composition at slice " +
              std::to_string(slice) + " (rcond " + std::to_string(rcond) +
              ")"),
        slice_(slice) {}
  std::size_t slice() const { return slice_; }

 private:
  std::size_t slice_;
};

class QuadratureConvergence : public Error {
 public:
  QuadratureConvergence(double change, double tolerance)
      : Error("quadrature not converged: doubling the node count changed "
              "entries by " +
              std::to_string(change) + " > " + std::to_string(tolerance)),
        change_(change) {}
  double change() const { return change_; }

 private:
  double change_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qscat
