// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace dmse {

// Error categories surfaced through the C API as status codes.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training or inference.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DMSE_REQUIRE(cond, msg)                 \
  do {                                          \
    if (!(cond)) throw ::dmse::InvalidArgument(msg); \
  } while (0)

}  // namespace dmse
