#include "crcseg/error.hpp"

#include <sstream>

namespace crcseg {

std::string_view error_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::SoftmaxValidation: return "SoftmaxValidationError";
  case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
  case ErrorCode::ZeroValidPixels: return "ZeroValidPixels";
  case ErrorCode::EmptyCalibrationSet: return "EmptyCalibrationSet";
  case ErrorCode::InfeasibleAlpha: return "InfeasibleAlpha";
  case ErrorCode::ConfigMismatch: return "ConfigMismatch";
  case ErrorCode::DegenerateSplit: return "DegenerateSplit";
  case ErrorCode::Io: return "IoError";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
  case ErrorCode::UnsupportedDescriptor: return "UnsupportedDescriptor";
  case ErrorCode::FortranOrderUnsupported: return "FortranOrderUnsupported";
  case ErrorCode::ShapeRankError: return "ShapeRankError";
  case ErrorCode::MalformedHeader: return "MalformedHeader";
  case ErrorCode::TruncatedData: return "TruncatedData";
  case ErrorCode::ManifestError: return "ManifestError";
  case ErrorCode::JsonFormatError: return "JsonFormatError";
  case ErrorCode::ImageFormatError: return "ImageFormatError";
  }
  return "Unknown";
}

bool is_io_error(ErrorCode code) {
  return code >= ErrorCode::Io;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message),
      code_(code) {}

namespace {

std::string infeasible_message(double alpha, std::size_t n, double min_alpha,
                               std::size_t min_n) {
  std::ostringstream os;
  os.precision(17);
  os << "alpha=" << alpha << " cannot be guaranteed with n=" << n
     << " calibration examples (minimum feasible alpha " << min_alpha
     << "; minimum n for this alpha " << min_n << ")";
  return os.str();
}

} // namespace

InfeasibleAlphaError::InfeasibleAlphaError(double alpha, std::size_t n,
                                           double min_alpha, std::size_t min_n)
    : Error(ErrorCode::InfeasibleAlpha,
            infeasible_message(alpha, n, min_alpha, min_n)),
      alpha_(alpha), n_(n), min_alpha_(min_alpha), min_n_(min_n) {}

} // namespace crcseg
