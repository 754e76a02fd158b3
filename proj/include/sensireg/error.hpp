/* Copyright 2026 The sensireg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef SENSIREG_ERROR_HPP_
#define SENSIREG_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sensireg {

// Numeric values are shared with the C API status codes (sensireg.h).
enum class ErrorCode {
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kIo = 3,
  kCorruptFile = 4,
  kVersionMismatch = 5,
  kInvalidConfig = 6,
  kTrainingAborted = 7,
  kNumerical = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool cond, const std::string& what,
                    ErrorCode code = ErrorCode::kInvalidArgument) {
  if (!cond) Fail(code, what);
}

}  // namespace sensireg

#endif  // SENSIREG_ERROR_HPP_
