#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vpi {

/// Base of every error raised by the library. `kind()` is the stable name
/// used in machine-readable output.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define VPI_DEFINE_ERROR(Name)                                          \
  class Name : public Error {                                           \
   public:                                                              \
    using Error::Error;                                                 \
    const char* kind() const noexcept override { return #Name; }        \
  }

// prob-core
VPI_DEFINE_ERROR(ZeroMassError);
VPI_DEFINE_ERROR(DuplicateValueError);
VPI_DEFINE_ERROR(InvalidWeightError);
VPI_DEFINE_ERROR(EmptyRangeError);

// trace-runtime
VPI_DEFINE_ERROR(ReplayMismatchError);
VPI_DEFINE_ERROR(UnsupportedGuideError);

// estimators
VPI_DEFINE_ERROR(StatusError);
VPI_DEFINE_ERROR(WeightError);
VPI_DEFINE_ERROR(EmptyError);
VPI_DEFINE_ERROR(InvalidArgumentError);

// oracle
VPI_DEFINE_ERROR(EnumerationCapError);
VPI_DEFINE_ERROR(ConditioningOnNullError);
VPI_DEFINE_ERROR(ModelCrashError);
VPI_DEFINE_ERROR(GuideCrashError);

// cli-examples
VPI_DEFINE_ERROR(UnknownNameError);

#undef VPI_DEFINE_ERROR

class NoAcceptedRunsError : public Error {
 public:
  explicit NoAcceptedRunsError(std::size_t n_total)
      : Error("no accepted runs out of " + std::to_string(n_total)),
        n_total_(n_total) {}
  const char* kind() const noexcept override { return "NoAcceptedRunsError"; }
  std::size_t n_total() const noexcept { return n_total_; }

 private:
  std::size_t n_total_;
};

}  // namespace vpi
