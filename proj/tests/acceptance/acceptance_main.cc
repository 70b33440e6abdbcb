// tests/acceptance/acceptance_main.cc

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

#include <CLI11.hpp>

#include <chrono>
#include <exception>
#include <filesystem>
#include <iostream>

#include "report.h"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using dereverb::acceptance::Fmt;
  CLI::App app{"Acceptance checks, one criterion per run", "acceptance"};
  int criterion = 0;
  std::string work = (fs::temp_directory_path() / "dereverb_acceptance").string();
  app.add_option("--criterion", criterion, "Criterion number")
      ->required()
      ->check(CLI::Range(1, 8));
  app.add_option("--work-dir", work, "Scratch space for corpora and runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const fs::path dir = fs::path(work) / ("criterion" + std::to_string(criterion));
  fs::create_directories(dir);
  dereverb::acceptance::Report report(criterion);
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (criterion) {
      case 1: Criterion1(report); break;
      case 2: Criterion2(report); break;
      case 3: Criterion3(report); break;
      case 4: Criterion4(report); break;
      case 5: Criterion5(report, dir); break;
      case 6: Criterion6(report, dir); break;
      case 7: Criterion7(report, dir); break;
      case 8: Criterion8(report, dir); break;
    }
  } catch (const std::exception& e) {
    report.Check("completed without error", false, e.what());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << Fmt("criterion %d: %d/%d checks passed in %.1f s", criterion, report.passed(),
                   report.total(), seconds)
            << std::endl;
  return report.all_passed() ? 0 : 1;
}
