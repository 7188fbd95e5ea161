#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gopo {

/// Two vectors that must share a support do not.
class DimensionMismatch : public std::invalid_argument
{
public:
  DimensionMismatch(const std::string& what, std::size_t lhs, std::size_t rhs)
      : std::invalid_argument(what + ": length " + std::to_string(lhs) + " vs " + std::to_string(rhs)),
        lhs_(lhs),
        rhs_(rhs)
  {}

  std::size_t lhs() const noexcept { return lhs_; }
  std::size_t rhs() const noexcept { return rhs_; }

private:
  std::size_t lhs_;
  std::size_t rhs_;
};

/// A finite-difference probe landed within the margin of a kink.
class NonSmoothPoint : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Invalid or missing configuration field; the message names the field.
class ConfigError : public std::invalid_argument
{
public:
  ConfigError(const std::string& field, const std::string& why)
      : std::invalid_argument("config field '" + field + "': " + why), field_(field)
  {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Malformed input text (JSON syntax, CSV layout); the message carries the location.
class ParseError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace gopo
