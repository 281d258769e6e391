// Copyright 2026 The CRISP Authors. All Rights Reserved.
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

#include <string>

#include "json.hpp"

namespace crisp {

/// Serialises `doc` with sorted object keys, two-space indentation and
/// every floating-point number printed with exactly four decimals, so that
/// reports from separate runs diff cleanly.
std::string canonical_dump(const nlohmann::json& doc);

}  // namespace crisp
