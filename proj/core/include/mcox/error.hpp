#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcox {

enum class ErrorKind {
  InvalidArgument,
  MissingColumn,
  EmptyDataset,
  NegativeTime,
  EmptyRiskSet,
  NonFiniteValue,
  SingularInformation,
  NotConverged,
  EmptySubsample,
  IndexOutOfRange,
  TooFewEvents,
  DegenerateVariance,
};

std::string_view to_string(ErrorKind kind) noexcept;

// what() reads "<Kind>: <detail>" so the kind name survives a catch by
// std::exception.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mcox
