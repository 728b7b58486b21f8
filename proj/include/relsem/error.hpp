#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace relsem {

/// Base class of every error the library raises. `kind()` is a stable,
/// machine-readable class name; the CLI prints it as `error: <kind>: <msg>`.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define RELSEM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

RELSEM_DEFINE_ERROR(PoolExhausted);
RELSEM_DEFINE_ERROR(TemplateMismatch);
RELSEM_DEFINE_ERROR(DegenerateDocument);
RELSEM_DEFINE_ERROR(EntityLeak);
RELSEM_DEFINE_ERROR(UnknownToken);
RELSEM_DEFINE_ERROR(ShapeMismatch);
RELSEM_DEFINE_ERROR(ContextOverflow);
RELSEM_DEFINE_ERROR(DivergenceDetected);
RELSEM_DEFINE_ERROR(EmptyPromptSet);
RELSEM_DEFINE_ERROR(AxisMismatch);
RELSEM_DEFINE_ERROR(ConfigError);
RELSEM_DEFINE_ERROR(FormatError);
RELSEM_DEFINE_ERROR(IoError);

#undef RELSEM_DEFINE_ERROR

}  // namespace relsem
