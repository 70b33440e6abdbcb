// tools/cli.h

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

#ifndef DEREVERB_TOOLS_CLI_H_
#define DEREVERB_TOOLS_CLI_H_

#include <ostream>

namespace dereverb::cli {

constexpr int kExitOk = 0;
constexpr int kExitContract = 1;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;

// Parses argv, runs one subcommand and maps errors to exit codes.
int Dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dereverb::cli

#endif  // DEREVERB_TOOLS_CLI_H_
