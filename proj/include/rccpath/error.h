// Copyright 2026 The rccpath Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RCCPATH_ERROR_H_
#define RCCPATH_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace rccpath {

enum class ErrorCode {
  kInvalidInput,
  kNotFound,
  kIoError,
  kSchemaMismatch,
  kBackendError,
  kInsufficientTissue,
  kDegenerateStain,
  kStrategyUnavailable,
  kTriageFailed,
  kEmptySlide,
  kNoTumorDetected,
  kReportInconsistent,
  kConfigError,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the engine carries one of the codes above so that
/// callers (the pipeline, the CLI, the Python bindings) can branch on kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace rccpath

#endif  // RCCPATH_ERROR_H_
