#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crcseg {

/// Stable error identifiers. The CLI maps each one to an exit code, see
/// `is_io_error`.
enum class ErrorCode : std::uint8_t {
  InvalidArgument,
  DimensionMismatch,
  SoftmaxValidation,
  LabelOutOfRange,
  ZeroValidPixels,
  EmptyCalibrationSet,
  InfeasibleAlpha,
  ConfigMismatch,
  DegenerateSplit,
  // data / file format errors
  Io,
  BadMagic,
  UnsupportedVersion,
  UnsupportedDescriptor,
  FortranOrderUnsupported,
  ShapeRankError,
  MalformedHeader,
  TruncatedData,
  ManifestError,
  JsonFormatError,
  ImageFormatError,
};

std::string_view error_name(ErrorCode code);

/// True for failures caused by files or formats rather than by the data
/// contract (exit code 2 instead of 1).
bool is_io_error(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Raised when the risk level cannot be met even by the full label set:
/// B/(n+1) > alpha.
class InfeasibleAlphaError : public Error {
public:
  InfeasibleAlphaError(double alpha, std::size_t n, double min_alpha,
                       std::size_t min_n);

  double alpha() const noexcept { return alpha_; }
  std::size_t n() const noexcept { return n_; }
  double min_alpha() const noexcept { return min_alpha_; }
  std::size_t min_n() const noexcept { return min_n_; }

private:
  double alpha_;
  std::size_t n_;
  double min_alpha_;
  std::size_t min_n_;
};

} // namespace crcseg
