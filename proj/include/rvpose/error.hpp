#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rvpose {

enum class ErrorCode {
  NonPositiveDepth,
  InvalidDepth,
  EmptyMesh,
  DimensionMismatch,
  UnknownObjectId,
  OutOfGamutInput,
  TooFewPoints,
  DegenerateCorrespondences,
  SingularNormalEquations,
  NoValidDepth,
  EmptyBatch,
  InvalidSpec,
  EmptyModel,
  EmptyInput,
  MissingResult,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rvpose
