// include/dereverb/selftest.h

// Copyright 2026 The dereverb Authors.
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

#ifndef DEREVERB_SELFTEST_H_
#define DEREVERB_SELFTEST_H_

#include <ostream>
#include <string>
#include <vector>

namespace dereverb {

struct SelfCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Quick numeric checks of the installed build: STFT inversion, positional
// encoding, parameter counts of every full-size variant and finite-difference
// gradients of two small models. Writes one PASS/FAIL line per check to `log`
// when given.
std::vector<SelfCheck> RunSelfTest(std::ostream* log = nullptr);

}  // namespace dereverb

#endif  // DEREVERB_SELFTEST_H_
