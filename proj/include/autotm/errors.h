#ifndef AUTOTM_ERRORS_H_
#define AUTOTM_ERRORS_H_

#include <stdexcept>
#include <string>

namespace autotm {

// Base class for every error raised by the library. Carries a stable short
// code so the CLI can map failures to exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Bad user input: configuration, arguments, unsupported combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

#define AUTOTM_DEFINE_ERROR(Name, Base)                             \
  class Name : public Base {                                        \
   public:                                                          \
    explicit Name(const std::string& message) : Base(#Name, message) {} \
  }

AUTOTM_DEFINE_ERROR(EmptyVocabulary, Error);
AUTOTM_DEFINE_ERROR(EmptyCorpus, Error);
AUTOTM_DEFINE_ERROR(InvalidDimensions, Error);
AUTOTM_DEFINE_ERROR(DimensionMismatch, Error);
AUTOTM_DEFINE_ERROR(InvalidPipeline, Error);
AUTOTM_DEFINE_ERROR(UnknownToken, Error);
AUTOTM_DEFINE_ERROR(InsufficientData, Error);
AUTOTM_DEFINE_ERROR(DegenerateInput, Error);
AUTOTM_DEFINE_ERROR(JudgeUnavailable, Error);
AUTOTM_DEFINE_ERROR(UnparseableReply, Error);
AUTOTM_DEFINE_ERROR(FormatError, Error);
AUTOTM_DEFINE_ERROR(ProtocolError, Error);
AUTOTM_DEFINE_ERROR(UnknownDataset, Error);
AUTOTM_DEFINE_ERROR(RepresentationUnsupported, ConfigError);

#undef AUTOTM_DEFINE_ERROR

}  // namespace autotm

#endif  // AUTOTM_ERRORS_H_
