#pragma once

#include <stdexcept>
#include <string>

namespace bcert {

/// Base of every error thrown by the library. `kind()` is a stable tag that
/// the CLI and the service surface to callers.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define BCERT_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

// poly
BCERT_DEFINE_ERROR(UnknownSymbol);
BCERT_DEFINE_ERROR(NonPolynomial);
BCERT_DEFINE_ERROR(SyntaxError);
BCERT_DEFINE_ERROR(DimensionMismatch);
// moments
BCERT_DEFINE_ERROR(MomentOrderExceeded);
// sos
BCERT_DEFINE_ERROR(EmptyBox);
BCERT_DEFINE_ERROR(OddDegree);
BCERT_DEFINE_ERROR(MalformedProgram);
// sdp
BCERT_DEFINE_ERROR(NotSymmetric);
// synth
BCERT_DEFINE_ERROR(NonpositiveLambda);
BCERT_DEFINE_ERROR(InvalidProblem);
BCERT_DEFINE_ERROR(InvalidCertificate);
// app
BCERT_DEFINE_ERROR(NotTwoDimensional);
BCERT_DEFINE_ERROR(ConfigError);

#undef BCERT_DEFINE_ERROR

}  // namespace bcert
