#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace irksindy {

enum class Errc {
  StageCountOutOfRange,
  OrderExceedsMethod,
  EmptyLibrary,
  InvalidLibrarySpec,
  DimensionMismatch,
  UnknownModel,
  InvalidParameter,
  IntegrationFailure,
  WindowTooLarge,
  NonUniformGrid,
  DegenerateCoordinate,
  UnsupportedScalingMode,
  NonPolynomialLibrary,
  IoError,
  MalformedFile,
  NonConvergence,
  SingularJacobian,
  NonFiniteValue,
  InvalidArchitecture,
  ShapeMismatch,
  EmptyDataset,
  InvalidConfig,
};

std::string_view to_string(Errc code) noexcept;

/// Library-wide exception. Every failure carries one of the named codes so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace irksindy
