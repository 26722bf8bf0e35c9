#pragma once

#include <stdexcept>
#include <string>

namespace kf {

// Every failure the library raises deliberately carries one of these codes so
// callers (and the CLI) can react to the class of problem without parsing
// message strings.  Messages stay human-oriented: file, frame index, cluster
// id, whatever identifies the offender.
enum class ErrorCode {
  MissingFrame,
  ParseError,
  EmptySequence,
  EmptyCloud,
  DegenerateCloud,
  TooFewPoints,
  ShapeMismatch,
  DivergedOptimization,
  RegistrationFailed,
  DegenerateTrack,
  SingleGroup,
  CyclicConnectivity,
  InsufficientMotion,
  DegenerateRotation,
  EmptySurface,
  TreeJointMismatch,
  UnknownJointName,
  MissingMesh,
  NoCorrespondence,
  AlignmentError,
  InvalidConfig,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DivergedOptimization: return "DivergedOptimization";
    case ErrorCode::RegistrationFailed: return "RegistrationFailed";
    case ErrorCode::DegenerateTrack: return "DegenerateTrack";
    case ErrorCode::SingleGroup: return "SingleGroup";
    case ErrorCode::CyclicConnectivity: return "CyclicConnectivity";
    case ErrorCode::InsufficientMotion: return "InsufficientMotion";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::TreeJointMismatch: return "TreeJointMismatch";
    case ErrorCode::UnknownJointName: return "UnknownJointName";
    case ErrorCode::MissingMesh: return "MissingMesh";
    case ErrorCode::NoCorrespondence: return "NoCorrespondence";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace kf
