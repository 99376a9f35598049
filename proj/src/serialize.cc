// serialize.cc
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

#include "focce/serialize.h"

#include <fstream>

#include "focce/common.h"

namespace focce {

using nlohmann::json;

json ParamSetToJson(const ParamSet &ps) {
  json out = json::object();
  for (int h = 0; h < ps.Size(); ++h) {
    const Tensor &t = ps.Value(h);
    json entry;
    entry["shape"] = t.Shape();
    entry["data"] = std::vector<double>(t.Data(), t.Data() + t.NumEl());
    out[ps.Name(h)] = std::move(entry);
  }
  return out;
}

void ParamSetFromJson(const json &j, ParamSet *ps) {
  FOCCE_CHECK_MSG(j.is_object(), "parameter family must be a JSON object");
  FOCCE_CHECK_MSG(static_cast<int>(j.size()) == ps->Size(),
                  "checkpoint has " + std::to_string(j.size()) +
                      " tensors, model expects " + std::to_string(ps->Size()));
  for (int h = 0; h < ps->Size(); ++h) {
    const std::string &name = ps->Name(h);
    auto it = j.find(name);
    FOCCE_CHECK_MSG(it != j.end(), "checkpoint is missing tensor " + name);
    std::vector<int> shape;
    std::vector<double> data;
    try {
      shape = (*it).at("shape").get<std::vector<int>>();
      data = (*it).at("data").get<std::vector<double>>();
    } catch (const json::exception &e) {
      throw ContractError("bad entry for tensor " + name + ": " + e.what());
    }
    FOCCE_CHECK_MSG(shape == ps->Value(h).Shape(),
                    "shape mismatch for " + name);
    // The validating constructor rejects NaN/inf, so a corrupt checkpoint
    // fails here instead of poisoning a later training step.
    ps->Value(h) = Tensor(std::move(shape), std::move(data));
  }
}

void SaveCheckpoint(const std::string &path, const ParamSet &theta,
                    const ParamSet *omega) {
  json doc;
  doc["format"] = "focce-checkpoint";
  doc["version"] = 1;
  doc["theta"] = ParamSetToJson(theta);
  if (omega != nullptr) doc["omega"] = ParamSetToJson(*omega);
  std::ofstream os(path);
  FOCCE_CHECK_MSG(os.good(), "cannot open " + path + " for writing");
  os << doc.dump(2) << "\n";
  FOCCE_CHECK_MSG(os.good(), "write to " + path + " failed");
}

void LoadCheckpoint(const std::string &path, ParamSet *theta,
                    ParamSet *omega) {
  std::ifstream is(path);
  FOCCE_CHECK_MSG(is.good(), "cannot open " + path);
  json doc;
  try {
    is >> doc;
  } catch (const json::parse_error &e) {
    throw ContractError(std::string("checkpoint parse error: ") + e.what());
  }
  FOCCE_CHECK_MSG(doc.value("format", "") == "focce-checkpoint",
                  "not a focce checkpoint: " + path);
  FOCCE_CHECK_MSG(doc.value("version", 0) == 1,
                  "unsupported checkpoint version in " + path);
  FOCCE_CHECK_MSG(doc.contains("theta"), "checkpoint has no theta family");
  ParamSetFromJson(doc["theta"], theta);
  if (omega != nullptr) {
    FOCCE_CHECK_MSG(doc.contains("omega"),
                    "model expects an omega family but " + path +
                        " has none");
    ParamSetFromJson(doc["omega"], omega);
  }
}

}  // namespace focce
