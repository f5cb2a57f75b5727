#pragma once

#include <stdexcept>
#include <string>

namespace seedmix {

// Base of every error thrown by the library. `code()` is a stable
// machine-readable tag used by the CLI and the HTTP problem-detail bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define SEEDMIX_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(tag, message) {}    \
  }

SEEDMIX_DEFINE_ERROR(SchemaError, "schema");
SEEDMIX_DEFINE_ERROR(ParseError, "parse");
SEEDMIX_DEFINE_ERROR(ConflictError, "conflict");
SEEDMIX_DEFINE_ERROR(ValidationError, "validation");
SEEDMIX_DEFINE_ERROR(IntegrityError, "integrity");
SEEDMIX_DEFINE_ERROR(ArgumentError, "argument");
SEEDMIX_DEFINE_ERROR(DataGapError, "data_gap");
SEEDMIX_DEFINE_ERROR(DivergenceError, "divergence");
SEEDMIX_DEFINE_ERROR(DegenerateRangeError, "degenerate_range");
SEEDMIX_DEFINE_ERROR(UnknownCategoryError, "unknown_category");
SEEDMIX_DEFINE_ERROR(NoSolutionError, "no_solution");
SEEDMIX_DEFINE_ERROR(UndefinedScoreError, "undefined_score");
SEEDMIX_DEFINE_ERROR(KeyError, "key");
SEEDMIX_DEFINE_ERROR(IoError, "io");

#undef SEEDMIX_DEFINE_ERROR

}  // namespace seedmix
