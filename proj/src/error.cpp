#include "diffden/error.hpp"

namespace diffden {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonPositivePrice: return "NonPositivePrice";
    case Errc::DuplicateTimestamp: return "DuplicateTimestamp";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::DecayOutOfRange: return "DecayOutOfRange";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::BadParams: return "BadParams";
    case Errc::WrongKind: return "WrongKind";
    case Errc::OutOfRangeT: return "OutOfRangeT";
    case Errc::ZeroStd: return "ZeroStd";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::IoError: return "IoError";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::BadThreshold: return "BadThreshold";
    case Errc::TooShort: return "TooShort";
    case Errc::Undefined: return "Undefined";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoContinuation: return "NoContinuation";
    case Errc::SingleClass: return "SingleClass";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::Misalignment: return "Misalignment";
    case Errc::BadConfig: return "BadConfig";
    case Errc::Usage: return "Usage";
  }
  return "Unknown";
}

ErrorKind errc_kind(Errc code) noexcept {
  switch (code) {
    case Errc::Usage:
      return ErrorKind::Usage;
    case Errc::DivergedLoss:
    case Errc::NonFiniteState:
      return ErrorKind::Numeric;
    default:
      return ErrorKind::Data;
  }
}

}  // namespace diffden
