#pragma once

#include <stdexcept>
#include <string>

namespace rotostate {

enum class ErrorKind {
  InvalidParameter,
  SingularEvaluation,
  GridTooCoarse,
  NotInImage,
  NonConvergence,
  CorruptFile,
  IncompatibleRestart,
  NotABifurcationPoint,
  InvalidState,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::SingularEvaluation: return "singular-evaluation";
    case ErrorKind::GridTooCoarse: return "grid-too-coarse";
    case ErrorKind::NotInImage: return "not-in-image";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::CorruptFile: return "corrupt-file";
    case ErrorKind::IncompatibleRestart: return "incompatible-restart";
    case ErrorKind::NotABifurcationPoint: return "not-a-bifurcation-point";
    case ErrorKind::InvalidState: return "invalid-state";
  }
  return "unknown";
}

}  // namespace rotostate
