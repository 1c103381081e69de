#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace balancelab {

enum class Errc {
  kNoServerAvailable,
  kUnderflowRelease,
  kUnknownServer,
  kInvalidWeight,
  kEmptyPool,
  kInvalidConfig,
  kAllServersFull,
  kInvalidRequest,
  kEmptyCatalog,
  kInvalidStep,
  kInvalidWorkerCount,
  kIoError,
  kBindError,
  kParseError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kNoServerAvailable: return "NoServerAvailable";
    case Errc::kUnderflowRelease: return "UnderflowRelease";
    case Errc::kUnknownServer: return "UnknownServer";
    case Errc::kInvalidWeight: return "InvalidWeight";
    case Errc::kEmptyPool: return "EmptyPool";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kAllServersFull: return "AllServersFull";
    case Errc::kInvalidRequest: return "InvalidRequest";
    case Errc::kEmptyCatalog: return "EmptyCatalog";
    case Errc::kInvalidStep: return "InvalidStep";
    case Errc::kInvalidWorkerCount: return "InvalidWorkerCount";
    case Errc::kIoError: return "IoError";
    case Errc::kBindError: return "BindError";
    case Errc::kParseError: return "ParseError";
  }
  return "Unknown";
}

// Every failure the library raises carries one of the codes above so callers
// (CLI exit codes, per-cell harness reporting) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace balancelab
