#pragma once

#include <stdexcept>
#include <string>

namespace hypergrid {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at a stage boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class MappingError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamplesError : public Error {
 public:
  InsufficientSamplesError(int label, std::size_t available, std::size_t wanted)
      : Error("class " + std::to_string(label) + " has " + std::to_string(available) +
              " labeled pixels, " + std::to_string(wanted) + " requested"),
        label_(label) {}
  int label() const noexcept { return label_; }

 private:
  int label_;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : Error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Names the pipeline stage that failed; the original error is nested inside.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace hypergrid
