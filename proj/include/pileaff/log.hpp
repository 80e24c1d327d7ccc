// Copyright 2026 The pileaff Authors
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

#pragma once

// Minimal leveled logging with a replaceable sink (stderr by default).

#include <functional>
#include <string>

namespace pileaff {

enum class LogLevel : int { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Installs a sink; an empty function restores the default stderr sink.
void setLogSink(LogSink sink);
/// Messages below this level are dropped (default kInfo).
void setLogLevel(LogLevel level);
void logMessage(LogLevel level, const std::string& message);

inline void logInfo(const std::string& m) { logMessage(LogLevel::kInfo, m); }
inline void logWarn(const std::string& m) { logMessage(LogLevel::kWarn, m); }
inline void logDebug(const std::string& m) { logMessage(LogLevel::kDebug, m); }

}  // namespace pileaff
