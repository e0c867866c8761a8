#pragma once

#include <stdexcept>
#include <string>

namespace prodsc {

// Error hierarchy shared across the library. Every failure mode named in a
// module contract maps onto one of these.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonSquare : Error {
  using Error::Error;
};
struct NotConverged : Error {
  using Error::Error;
};
struct NotPositiveDefinite : Error {
  using Error::Error;
};
struct ZeroColumn : Error {
  explicit ZeroColumn(std::size_t index)
      : Error("zero column at index " + std::to_string(index)), index(index) {}
  std::size_t index;
};
struct NumericalOverflow : Error {
  using Error::Error;
};
struct BatchTooSmall : Error {
  using Error::Error;
};
struct InfeasibleBracket : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct BadArrangement : Error {
  using Error::Error;
};
struct DegenerateAffinity : Error {
  using Error::Error;
};
struct StaleCache : Error {
  using Error::Error;
};
struct IoFailure : Error {
  using Error::Error;
};
struct BadMagic : Error {
  using Error::Error;
};
struct TruncatedFile : Error {
  using Error::Error;
};
struct NonRectangularCsv : Error {
  using Error::Error;
};
struct LabelLengthMismatch : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace prodsc
