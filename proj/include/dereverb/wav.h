// include/dereverb/wav.h

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

#ifndef DEREVERB_WAV_H_
#define DEREVERB_WAV_H_

#include <filesystem>

#include "dereverb/dsp.h"

namespace dereverb {

enum class WavEncoding { kPcm16, kFloat32 };

// Reads a mono RIFF/WAVE file (16-bit PCM or 32-bit float, plain or
// extensible header). Throws IoError on anything else.
Waveform ReadWav(const std::filesystem::path& path);

// PCM16 output clips to [-1, 1).
void WriteWav(const std::filesystem::path& path, const Waveform& w,
              WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace dereverb

#endif  // DEREVERB_WAV_H_
