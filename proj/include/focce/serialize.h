// focce/serialize.h
//
// Copyright      2026   The focce authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FOCCE_SERIALIZE_H_
#define FOCCE_SERIALIZE_H_

#include <string>

#include <json.hpp>

#include "focce/params.h"

namespace focce {

// Checkpoint format, v1. One JSON document:
//
//   {
//     "format": "focce-checkpoint",
//     "version": 1,
//     "theta": { "<name>": {"shape": [..], "data": [..]}, ... },
//     "omega": { ... }            // absent for deformed-baseline runs
//   }
//
// Tensor data is row-major; doubles round-trip exactly through the JSON
// writer. Key order inside a family is alphabetical (JSON object), which
// keeps the bytes stable across runs.

nlohmann::json ParamSetToJson(const ParamSet &ps);

// Overwrites values of an already-constructed set; every name in the set
// must appear in j with a matching shape and vice versa. This is the load
// path: build the net (which registers parameters), then restore.
void ParamSetFromJson(const nlohmann::json &j, ParamSet *ps);

void SaveCheckpoint(const std::string &path, const ParamSet &theta,
                    const ParamSet *omega);

// omega may be nullptr to ignore any omega family in the file; if omega is
// given, the file must contain one.
void LoadCheckpoint(const std::string &path, ParamSet *theta, ParamSet *omega);

}  // namespace focce

#endif  // FOCCE_SERIALIZE_H_
