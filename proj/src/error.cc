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

#include "rccpath/error.h"

namespace rccpath {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIoError: return "IOError";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kInsufficientTissue: return "InsufficientTissue";
    case ErrorCode::kDegenerateStain: return "DegenerateStain";
    case ErrorCode::kStrategyUnavailable: return "StrategyUnavailable";
    case ErrorCode::kTriageFailed: return "TriageFailed";
    case ErrorCode::kEmptySlide: return "EmptySlide";
    case ErrorCode::kNoTumorDetected: return "NoTumorDetected";
    case ErrorCode::kReportInconsistent: return "ReportInconsistent";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace rccpath
