// tests/acceptance/report.h

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

#ifndef DEREVERB_TESTS_ACCEPTANCE_REPORT_H_
#define DEREVERB_TESTS_ACCEPTANCE_REPORT_H_

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace dereverb::acceptance {

// One PASS/FAIL line per check, prefixed with the criterion number.
class Report {
 public:
  explicit Report(int criterion) : tag_("[" + std::to_string(criterion) + "] ") {}

  void Check(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << tag_ << name << ": " << detail << std::endl;
    ++total_;
    if (pass) ++passed_;
  }
  void Info(const std::string& line) { std::cout << "     " << tag_ << line << std::endl; }

  bool all_passed() const { return passed_ == total_; }
  int passed() const { return passed_; }
  int total() const { return total_; }

 private:
  std::string tag_;
  int passed_ = 0;
  int total_ = 0;
};

// printf-style formatting into a std::string.
template <typename... Args>
std::string Fmt(const char* format, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

void Criterion1(Report& r);
void Criterion2(Report& r);
void Criterion3(Report& r);
void Criterion4(Report& r);
void Criterion5(Report& r, const std::filesystem::path& work);
void Criterion6(Report& r, const std::filesystem::path& work);
void Criterion7(Report& r, const std::filesystem::path& work);
void Criterion8(Report& r, const std::filesystem::path& work);

}  // namespace dereverb::acceptance

#endif  // DEREVERB_TESTS_ACCEPTANCE_REPORT_H_
