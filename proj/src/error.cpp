#include "l2mreg/error.hpp"

namespace l2mreg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kEmptyCloud: return "EmptyCloud";
    case ErrorKind::kDegenerateInput: return "DegenerateInput";
    case ErrorKind::kNonPlanarPolygon: return "NonPlanarPolygon";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kInconsistentDimensions: return "InconsistentDimensions";
    case ErrorKind::kNoVerticalWalls: return "NoVerticalWalls";
    case ErrorKind::kNoCoverage: return "NoCoverage";
    case ErrorKind::kNoValidFacade: return "NoValidFacade";
    case ErrorKind::kNoCandidates: return "NoCandidates";
    case ErrorKind::kModelNormalMismatch: return "ModelNormalMismatch";
    case ErrorKind::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::kRankDeficient: return "RankDeficient";
    case ErrorKind::kNoConvergence: return "NoConvergence";
    case ErrorKind::kInsufficientPairs: return "InsufficientPairs";
    case ErrorKind::kNoNeighbors: return "NoNeighbors";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorKind kind, const std::string& message,
                    const std::string& subject, std::size_t line) {
  std::string out(to_string(kind));
  if (!subject.empty()) out += "(" + subject + ")";
  if (line > 0) out += " at line " + std::to_string(line);
  out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string subject,
             std::size_t line)
    : std::runtime_error(compose(kind, message, subject, line)),
      kind_(kind),
      subject_(std::move(subject)),
      line_(line) {}

}  // namespace l2mreg
