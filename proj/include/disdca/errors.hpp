#pragma once

#include <stdexcept>
#include <string>

namespace disdca {

// Error classes map one-to-one onto CLI exit codes.
enum class ErrorClass { config = 2, io = 3, transport = 4, numerical = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorClass::config, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorClass::io, w) {}
};
struct TransportError : Error {
  explicit TransportError(const std::string& w) : Error(ErrorClass::transport, w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorClass::numerical, w) {}
};
// Conjugate evaluated outside its domain.
struct DomainError : NumericalError {
  explicit DomainError(const std::string& w) : NumericalError(w) {}
};

}  // namespace disdca
