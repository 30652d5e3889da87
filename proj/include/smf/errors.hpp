#pragma once

#include <stdexcept>
#include <string>

namespace smf {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (mismatched base points,
/// non-tangent input, non-uniform sample stride, ...).
struct ContractViolation : Error {
  using Error::Error;
};

/// Numerically degenerate input (zero-norm point fed to a projection).
struct DegenerateInput : Error {
  using Error::Error;
};

/// A chart-valued state straddles chart domains and has to be migrated
/// before derivatives can be taken.
struct RechartRequired : Error {
  using Error::Error;
};

/// Fixed-point solve did not reach tolerance; carries the last residual.
struct NonconvergenceError : Error {
  NonconvergenceError(const std::string& msg, double residual_, int iterations_)
      : Error(msg), residual(residual_), iterations(iterations_) {}
  double residual;
  int iterations;
};

/// Bad run configuration (unknown key, invalid value, stability gate).
struct ConfigError : Error {
  ConfigError(const std::string& key_, const std::string& msg)
      : Error("config: " + key_ + ": " + msg), key(key_) {}
  std::string key;
};

/// Verifier input does not satisfy its hypotheses (balance residuals too
/// large, insufficient decay at the domain truncation).
struct InvalidInput : Error {
  using Error::Error;
};

}  // namespace smf
