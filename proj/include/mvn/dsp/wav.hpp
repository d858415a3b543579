// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "mvn/dsp/stft.hpp"

namespace mvn::dsp {

/// Reads a PCM 16-bit mono little-endian RIFF/WAVE file; samples map to [-1, 1).
Waveform read_wav(const std::filesystem::path& path);

/// Writes PCM 16-bit mono. Samples are scaled by 32768, rounded and clipped.
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace mvn::dsp
