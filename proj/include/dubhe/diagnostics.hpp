/**
 * Copyright 2026 The Dubhe Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DUBHE_DIAGNOSTICS_HPP_
#define DUBHE_DIAGNOSTICS_HPP_

#include <functional>
#include <string>

namespace dubhe {

using WarningSink = std::function<void(const std::string&)>;

/// Routes library warnings; the default sink writes "warning: ..." to stderr.
/// Passing an empty function silences warnings. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace dubhe

#endif  // DUBHE_DIAGNOSTICS_HPP_
