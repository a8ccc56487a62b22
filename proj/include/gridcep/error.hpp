/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridcep {

enum class ErrorCode {
    InvalidArgument,
    CyclicHierarchy,
    UnresolvedPrefix,
    UnknownSource,
    SchemaViolation,
    OutOfOrderInput,
    SyntaxError,
    UnknownStream,
    UndeclaredVariable,
    UnknownAttribute,
    UnresolvedQName,
    DuplicateId,
    OutOfOrder,
    UnknownPattern,
    ConfigError,
    UnknownTarget,
    DuplicateRule,
    BindError,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::CyclicHierarchy: return "CyclicHierarchy";
        case ErrorCode::UnresolvedPrefix: return "UnresolvedPrefix";
        case ErrorCode::UnknownSource: return "UnknownSource";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::OutOfOrderInput: return "OutOfOrderInput";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownStream: return "UnknownStream";
        case ErrorCode::UndeclaredVariable: return "UndeclaredVariable";
        case ErrorCode::UnknownAttribute: return "UnknownAttribute";
        case ErrorCode::UnresolvedQName: return "UnresolvedQName";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::OutOfOrder: return "OutOfOrder";
        case ErrorCode::UnknownPattern: return "UnknownPattern";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::UnknownTarget: return "UnknownTarget";
        case ErrorCode::DuplicateRule: return "DuplicateRule";
        case ErrorCode::BindError: return "BindError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Base of every error thrown by the library. `subject()` is the offending
/// token, stream, id or path, so callers can report it without parsing the
/// message.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, std::string subject, const std::string& detail = {})
        : std::runtime_error(compose(code, subject, detail)), code_(code), subject_(std::move(subject)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

  private:
    static std::string compose(ErrorCode code, const std::string& subject, const std::string& detail) {
        std::string msg(to_string(code));
        msg += "(" + subject + ")";
        if (!detail.empty()) {
            msg += ": " + detail;
        }
        return msg;
    }

    ErrorCode code_;
    std::string subject_;
};

}  // namespace gridcep
