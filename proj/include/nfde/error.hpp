#pragma once

#include <stdexcept>
#include <string>

namespace nfde {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent model configuration. `key()` names the offending entry.
class config_error : public error {
public:
  config_error(std::string key, const std::string& what)
      : error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

/// The neutral operator fails the contraction bound required for inversion.
class stability_error : public error {
public:
  stability_error(double gamma, const std::string& what) : error(what), gamma_(gamma) {}
  double gamma() const noexcept { return gamma_; }

private:
  double gamma_;
};

/// A fixed-point iteration exhausted its budget.
class convergence_error : public error {
public:
  convergence_error(const std::string& what, double residual, long step = -1)
      : error(what), residual_(residual), step_(step) {}
  double residual() const noexcept { return residual_; }
  long step() const noexcept { return step_; }

private:
  double residual_;
  long step_;
};

} // namespace nfde
