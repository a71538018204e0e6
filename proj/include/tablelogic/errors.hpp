#pragma once

#include <stdexcept>
#include <string>

namespace tablelogic {

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base for failures raised by a completion backend.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Retries exhausted on a transient failure (network, 429, 5xx).
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Authentication rejected; never retried.
class CredentialError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The endpoint answered but the body carried no completion text.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

class ChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tablelogic
