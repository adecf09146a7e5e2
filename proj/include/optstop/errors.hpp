#pragma once

#include <stdexcept>
#include <string>

namespace optstop {

// Engine error codes. Every throwing operation documents which of these it
// can raise; the CLI maps them onto process exit codes.
enum class Errc {
  ParameterOutOfRange,
  MalformedSpec,
  ProbabilitySumViolation,
  OrphanNode,
  LevelOutOfRange,
  UnsupportedModelKind,
  InvalidRule,
  NegativeReward,
  NonMonotoneSequence,
  ModelRewardMismatch,
  StaleResult,
  EpsilonOutOfRange,
  WindowOrderViolation,
  ModelTooLarge,
  FloatModeRejected,
  SingularRegression,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ParameterOutOfRange: return "PARAMETER_OUT_OF_RANGE";
    case Errc::MalformedSpec: return "MALFORMED_SPEC";
    case Errc::ProbabilitySumViolation: return "PROBABILITY_SUM_VIOLATION";
    case Errc::OrphanNode: return "ORPHAN_NODE";
    case Errc::LevelOutOfRange: return "LEVEL_OUT_OF_RANGE";
    case Errc::UnsupportedModelKind: return "UNSUPPORTED_MODEL_KIND";
    case Errc::InvalidRule: return "INVALID_RULE";
    case Errc::NegativeReward: return "NEGATIVE_REWARD";
    case Errc::NonMonotoneSequence: return "NON_MONOTONE_SEQUENCE";
    case Errc::ModelRewardMismatch: return "MODEL_REWARD_MISMATCH";
    case Errc::StaleResult: return "STALE_RESULT";
    case Errc::EpsilonOutOfRange: return "EPSILON_OUT_OF_RANGE";
    case Errc::WindowOrderViolation: return "WINDOW_ORDER_VIOLATION";
    case Errc::ModelTooLarge: return "MODEL_TOO_LARGE";
    case Errc::FloatModeRejected: return "FLOAT_MODE_REJECTED";
    case Errc::SingularRegression: return "SINGULAR_REGRESSION";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace optstop
