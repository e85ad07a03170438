// Copyright 2026 The GRIDS Authors
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

#include <filesystem>

#include "grids/perturb.hpp"

namespace grids {

enum class WavEncoding { pcm16, float32 };

/// Mono RIFF/WAVE reader for 16-bit PCM and 32-bit IEEE float data.
/// Multi-channel or other encodings throw InputError.
Waveform read_wav(const std::filesystem::path& path);

/// PCM16 output is clipped to [-1, 1] and rounded to the nearest code.
void write_wav(const Waveform& wav, const std::filesystem::path& path, WavEncoding encoding = WavEncoding::float32);

}  // namespace grids
