#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace diffden {

// Failure classes map onto CLI exit codes: usage 1, data 2, numeric 3.
enum class ErrorKind { Usage, Data, Numeric };

enum class Errc {
  // data_ingest
  MalformedRow,
  NonPositivePrice,
  DuplicateTimestamp,
  SeriesTooShort,
  EmptySeries,
  DecayOutOfRange,
  IndexOutOfRange,
  BadParams,
  // sde_core
  WrongKind,
  OutOfRangeT,
  ZeroStd,
  // score_model
  EmptyDataset,
  DivergedLoss,
  IoError,
  VersionMismatch,
  ShapeMismatch,
  // denoiser
  LengthMismatch,
  NonFiniteState,
  // evaluation
  BadThreshold,
  TooShort,
  Undefined,
  EmptyInput,
  // classifier
  NoContinuation,
  SingleClass,
  WidthMismatch,
  // backtest
  Misalignment,
  // config / cli
  BadConfig,
  Usage,
};

std::string_view errc_name(Errc code) noexcept;
ErrorKind errc_kind(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return errc_kind(code_); }

 private:
  Errc code_;
};

}  // namespace diffden
