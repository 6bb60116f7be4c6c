#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace abtest {

// Base of all library errors. `name()` is the stable identifier surfaced in
// diagnostics; `what()` is "<name>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string_view name, const std::string& message)
      : std::runtime_error(std::string(name) + ": " + message), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define ABTEST_DEFINE_ERROR(NAME)                                        \
  struct NAME : Error {                                                  \
    explicit NAME(const std::string& message) : Error(#NAME, message) {} \
  }

ABTEST_DEFINE_ERROR(ConflictingGroup);
ABTEST_DEFINE_ERROR(NegativeMetric);
ABTEST_DEFINE_ERROR(InsufficientUsers);
ABTEST_DEFINE_ERROR(DegenerateMeans);
ABTEST_DEFINE_ERROR(OutOfDomain);
ABTEST_DEFINE_ERROR(InvalidReplicateCount);
ABTEST_DEFINE_ERROR(EmptyDistribution);
ABTEST_DEFINE_ERROR(InsufficientReplicates);
ABTEST_DEFINE_ERROR(UnsupportedCombination);
ABTEST_DEFINE_ERROR(MalformedInput);

#undef ABTEST_DEFINE_ERROR

}  // namespace abtest
