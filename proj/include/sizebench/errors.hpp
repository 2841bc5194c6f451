#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sizebench {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SIZEBENCH_ERROR(NAME)            \
  class NAME : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

// Data ingestion and series construction.
SIZEBENCH_ERROR(IoError);
SIZEBENCH_ERROR(MissingColumnError);
SIZEBENCH_ERROR(EmptySeriesError);
SIZEBENCH_ERROR(NonPositivePriceError);
SIZEBENCH_ERROR(SeriesTooShortError);
SIZEBENCH_ERROR(InvalidRegimeError);

// Windowed transforms and statistics.
SIZEBENCH_ERROR(WindowTooLargeError);
SIZEBENCH_ERROR(InsufficientDataError);
SIZEBENCH_ERROR(ZeroVarianceError);
SIZEBENCH_ERROR(UnknownKindError);
SIZEBENCH_ERROR(MissingParamError);
SIZEBENCH_ERROR(DomainError);

// Portfolio math.
SIZEBENCH_ERROR(SingularCovarianceError);
SIZEBENCH_ERROR(NonSymmetricError);

// Risk and VaR backtests.
SIZEBENCH_ERROR(DateMisalignmentError);
SIZEBENCH_ERROR(EmptySequenceError);
SIZEBENCH_ERROR(TooFewViolationsError);

// State-space filtering.
SIZEBENCH_ERROR(NonFiniteInputError);
SIZEBENCH_ERROR(SingularInnovationError);

// Backtest engine.
SIZEBENCH_ERROR(EmptyUniverseError);
SIZEBENCH_ERROR(CalendarMismatchError);
SIZEBENCH_ERROR(InsufficientHistoryError);
SIZEBENCH_ERROR(TooFewNamesError);

// Command-line entry point.
SIZEBENCH_ERROR(UnknownSubcommandError);

#undef SIZEBENCH_ERROR

// Row-level ingestion failure carrying the 1-based line number.
class MalformedRowError : public Error {
 public:
  MalformedRowError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Config-file validation failure carrying the JSON path of the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& reason)
      : Error(path + ": " + reason), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace sizebench
