#include "lmpanel/errors.hpp"

namespace lmpanel {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonBinaryResponse: return "NON_BINARY_RESPONSE";
    case ErrorCode::MissingValue: return "MISSING_VALUE";
    case ErrorCode::BadFacility: return "BAD_FACILITY";
    case ErrorCode::EmptyPanel: return "EMPTY_PANEL";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::InfeasibleCuts: return "INFEASIBLE_CUTS";
    case ErrorCode::ZeroLikelihood: return "ZERO_LIKELIHOOD";
    case ErrorCode::AllStartsFailed: return "ALL_STARTS_FAILED";
    case ErrorCode::NotM2: return "NOT_M2";
    case ErrorCode::DegenerateCov: return "DEGENERATE_COV";
  }
  return "UNKNOWN";
}

bool is_data_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonBinaryResponse:
    case ErrorCode::MissingValue:
    case ErrorCode::BadFacility:
    case ErrorCode::EmptyPanel:
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

} // namespace lmpanel
