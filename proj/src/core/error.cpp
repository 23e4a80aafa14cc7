// Copyright 2026 The mvlad Authors
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

#include "core/error.hpp"

namespace mvlad {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIntegrity: return "integrity error";
    case ErrorKind::kIndex: return "index error";
    case ErrorKind::kEvaluation: return "evaluation error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kConfiguration: return "configuration error";
    case ErrorKind::kTokenization: return "tokenization error";
    case ErrorKind::kIncompleteDecode: return "incomplete decode";
    case ErrorKind::kScheduler: return "scheduler invariant violation";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kUsage: return "usage error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace mvlad
