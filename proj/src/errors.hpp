// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_ERRORS_HPP
#define MMIE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mmie {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmie

#endif  // MMIE_ERRORS_HPP
