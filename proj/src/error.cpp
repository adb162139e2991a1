#include "irksindy/error.hpp"

namespace irksindy {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::StageCountOutOfRange: return "StageCountOutOfRange";
    case Errc::OrderExceedsMethod: return "OrderExceedsMethod";
    case Errc::EmptyLibrary: return "EmptyLibrary";
    case Errc::InvalidLibrarySpec: return "InvalidLibrarySpec";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::UnknownModel: return "UnknownModel";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::IntegrationFailure: return "IntegrationFailure";
    case Errc::WindowTooLarge: return "WindowTooLarge";
    case Errc::NonUniformGrid: return "NonUniformGrid";
    case Errc::DegenerateCoordinate: return "DegenerateCoordinate";
    case Errc::UnsupportedScalingMode: return "UnsupportedScalingMode";
    case Errc::NonPolynomialLibrary: return "NonPolynomialLibrary";
    case Errc::IoError: return "IoError";
    case Errc::MalformedFile: return "MalformedFile";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::SingularJacobian: return "SingularJacobian";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::InvalidArchitecture: return "InvalidArchitecture";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace irksindy
