#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace l2mreg {

enum class ErrorKind {
  kInvalidArgument,
  kParse,
  kIo,
  kEmptyCloud,
  kDegenerateInput,
  kNonPlanarPolygon,
  kDuplicateId,
  kInconsistentDimensions,
  kNoVerticalWalls,
  kNoCoverage,
  kNoValidFacade,
  kNoCandidates,
  kModelNormalMismatch,
  kDegenerateGeometry,
  kRankDeficient,
  kNoConvergence,
  kInsufficientPairs,
  kNoNeighbors,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. `subject` names the offending entity (wall id,
/// file path) when there is one; `line` is set for parse errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string subject = {},
        std::size_t line = 0);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& subject() const noexcept { return subject_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  std::string subject_;
  std::size_t line_;
};

}  // namespace l2mreg
