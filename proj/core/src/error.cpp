#include "mcox/error.hpp"

namespace mcox {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::NegativeTime: return "NegativeTime";
    case ErrorKind::EmptyRiskSet: return "EmptyRiskSet";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::SingularInformation: return "SingularInformation";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::EmptySubsample: return "EmptySubsample";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::TooFewEvents: return "TooFewEvents";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind) {}

}  // namespace mcox
