#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace s2s {

// Mono 16-bit PCM WAV, little-endian. Samples are doubles in [-1, 1];
// conversion clamps and rounds half away from zero so writes are
// deterministic.

std::vector<std::uint8_t> encode_wav16(const std::vector<double>& samples, int sample_rate);
void write_wav16(const std::string& path, const std::vector<double>& samples, int sample_rate);

struct WavData {
  std::vector<double> samples;
  int sample_rate = 0;
};

// Rejects anything that is not mono 16-bit PCM with a descriptive error.
WavData read_wav16(const std::string& path);

}  // namespace s2s
