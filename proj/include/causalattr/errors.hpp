#pragma once

#include <stdexcept>
#include <string>

namespace causalattr {

// Base for all library errors. Subtypes carry the failure class so callers
// (and tests) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CAUSALATTR_ERROR(Name)                       \
  class Name : public Error {                        \
   public:                                           \
    using Error::Error;                              \
  }

// graph
CAUSALATTR_ERROR(CycleDetected);
CAUSALATTR_ERROR(DuplicateNode);
CAUSALATTR_ERROR(DanglingEdge);
CAUSALATTR_ERROR(UnknownNode);

// tabular
CAUSALATTR_ERROR(MissingColumn);
CAUSALATTR_ERROR(TypeMismatch);
CAUSALATTR_ERROR(EmptyTable);
CAUSALATTR_ERROR(SchemaMismatch);

// mechanisms
CAUSALATTR_ERROR(InsufficientData);
CAUSALATTR_ERROR(IncompatibleFamily);
CAUSALATTR_ERROR(UnsupportedFamily);

// engine
CAUSALATTR_ERROR(GraphMismatch);
CAUSALATTR_ERROR(NonLinearGaussianModel);
CAUSALATTR_ERROR(NotEnumerable);

// divergence
CAUSALATTR_ERROR(NonPositiveVariance);
CAUSALATTR_ERROR(AbsoluteContinuityViolation);
CAUSALATTR_ERROR(LengthMismatch);
CAUSALATTR_ERROR(TooFewPoints);
CAUSALATTR_ERROR(ZeroDistance);
CAUSALATTR_ERROR(IncompatibleMechanisms);

// shapley
CAUSALATTR_ERROR(TooManyPlayers);

// detect
CAUSALATTR_ERROR(BandwidthDegenerate);

// attribution
CAUSALATTR_ERROR(EmptySample);

// cli / io
CAUSALATTR_ERROR(IoError);
CAUSALATTR_ERROR(InvalidArgument);

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

#undef CAUSALATTR_ERROR

}  // namespace causalattr
