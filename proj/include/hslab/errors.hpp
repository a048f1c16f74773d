// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hslab {

enum class ErrorKind { domain, contract, parameter, numeric, quadrature, invariant, estimator };

inline const char* to_string(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::contract: return "contract";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::quadrature: return "quadrature";
    case ErrorKind::invariant: return "invariant";
    case ErrorKind::estimator: return "estimator";
  }
  return "unknown";
}

/// Base of every error raised by the library. `code()` is a stable
/// machine-readable token such as "feller-violation".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

#define HSLAB_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    Name(std::string code, const std::string& message)                  \
        : Error(ErrorKind::Kind, std::move(code), message) {}           \
  };

HSLAB_DEFINE_ERROR(DomainError, domain)
HSLAB_DEFINE_ERROR(ContractError, contract)
HSLAB_DEFINE_ERROR(ParameterError, parameter)
HSLAB_DEFINE_ERROR(NumericError, numeric)
HSLAB_DEFINE_ERROR(QuadratureError, quadrature)
HSLAB_DEFINE_ERROR(InvariantError, invariant)
HSLAB_DEFINE_ERROR(EstimatorError, estimator)

#undef HSLAB_DEFINE_ERROR

}  // namespace hslab
