#include "harfuse/errors.hpp"

namespace harfuse {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::contract: return "contract";
    case ErrorCode::insufficient_samples: return "insufficient-samples";
    case ErrorCode::not_positive_definite: return "not-positive-definite";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::schema: return "schema";
    case ErrorCode::too_short: return "too-short";
    case ErrorCode::provenance: return "provenance";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::degenerate_labels: return "degenerate-labels";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::deserialization: return "deserialization";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

NotPositiveDefiniteError::NotPositiveDefiniteError(std::size_t pivot, double value)
    : Error(ErrorCode::not_positive_definite,
            "matrix is not positive definite: pivot " + std::to_string(pivot) +
                " = " + std::to_string(value)),
      pivot_(pivot) {}

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& why)
    : Error(ErrorCode::parse, file + ":" + std::to_string(line) + ": " + why), line_(line) {}

TooShortError::TooShortError(std::size_t actual, std::size_t required)
    : Error(ErrorCode::too_short, "recording has " + std::to_string(actual) +
                                      " samples, need at least " + std::to_string(required)),
      actual_(actual) {}

DivergenceError::DivergenceError(std::size_t epoch, const std::string& what)
    : Error(ErrorCode::divergence, "diverged at epoch " + std::to_string(epoch) + ": " + what),
      epoch_(epoch) {}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::config:
      return 2;
    case ErrorCode::io:
    case ErrorCode::parse:
    case ErrorCode::schema:
    case ErrorCode::too_short:
    case ErrorCode::provenance:
    case ErrorCode::empty_dataset:
    case ErrorCode::degenerate_labels:
    case ErrorCode::alignment:
    case ErrorCode::deserialization:
      return 3;
    case ErrorCode::divergence:
    case ErrorCode::not_positive_definite:
      return 4;
    default:
      return 1;
  }
}

}  // namespace harfuse
