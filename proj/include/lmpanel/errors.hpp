#pragma once

#include <stdexcept>
#include <string>

namespace lmpanel {

enum class ErrorCode {
  // data / input errors
  NonBinaryResponse,
  MissingValue,
  BadFacility,
  EmptyPanel,
  ParseError,
  SchemaError,
  IoError,
  // numerical / model errors
  InfeasibleCuts,
  ZeroLikelihood,
  AllStartsFailed,
  NotM2,
  DegenerateCov,
};

const char* error_code_name(ErrorCode code);

// True for errors caused by malformed input rather than by the numerics.
bool is_data_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

} // namespace lmpanel
