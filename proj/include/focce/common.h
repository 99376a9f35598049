// focce/common.h
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

#ifndef FOCCE_COMMON_H_
#define FOCCE_COMMON_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace focce {

// Log-zero sentinel. Lattice boundary cells live in log-space, so -inf is a
// legal value wherever a probability of exactly zero is meant.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Contract violations throw; numerical divergence is reported separately by
// the training loop.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string &msg) : std::runtime_error(msg) {}
};

namespace internal {
[[noreturn]] inline void FailCheck(const char *cond, const char *file,
                                   int line, const std::string &msg) {
  std::ostringstream os;
  os << file << ":" << line << ": check failed: " << cond;
  if (!msg.empty()) os << " (" << msg << ")";
  throw ContractError(os.str());
}
}  // namespace internal

#define FOCCE_CHECK(cond)                                              \
  do {                                                                  \
    if (!(cond)) ::focce::internal::FailCheck(#cond, __FILE__, __LINE__, ""); \
  } while (0)

#define FOCCE_CHECK_MSG(cond, msg)                                      \
  do {                                                                  \
    if (!(cond))                                                        \
      ::focce::internal::FailCheck(#cond, __FILE__, __LINE__, (msg));   \
  } while (0)

}  // namespace focce

#endif  // FOCCE_COMMON_H_
