#include "s2s/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "s2s/errors.hpp"

namespace s2s {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::int16_t to_pcm16(double x) {
  double clamped = std::clamp(x, -1.0, 1.0);
  double scaled = clamped * 32767.0;
  return static_cast<std::int16_t>(scaled >= 0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5));
}

}  // namespace

std::vector<std::uint8_t> encode_wav16(const std::vector<double>& samples, int sample_rate) {
  require(sample_rate > 0, "wav: sample_rate must be positive");
  std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : samples) {
    std::int16_t v = to_pcm16(s);
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  }
  return out;
}

void write_wav16(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  auto bytes = encode_wav16(samples, sample_rate);
  std::ofstream os(path, std::ios::binary);
  ensure(os.good(), "wav: cannot open ", path, " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  ensure(os.good(), "wav: write failed for ", path);
}

WavData read_wav16(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  ensure(is.good(), "wav: cannot open ", path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  require(bytes.size() >= 44, "wav: ", path, " too short to be a WAV file");
  require(std::memcmp(bytes.data(), "RIFF", 4) == 0 && std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          "wav: ", path, " is not a RIFF/WAVE file");

  WavData wav;
  std::size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    std::uint32_t chunk_size = get_u32(hdr + 4);
    pos += 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      require(chunk_size >= 16 && pos + 16 <= bytes.size(), "wav: malformed fmt chunk in ", path);
      const std::uint8_t* fmt = bytes.data() + pos;
      std::uint16_t audio_format = get_u16(fmt);
      std::uint16_t channels = get_u16(fmt + 2);
      std::uint32_t rate = get_u32(fmt + 4);
      std::uint16_t bits = get_u16(fmt + 14);
      require(audio_format == 1, "wav: ", path, " uses format ", audio_format,
              ", only PCM (1) is supported");
      require(channels == 1, "wav: ", path, " has ", channels, " channels, only mono is supported");
      require(bits == 16, "wav: ", path, " has ", bits, " bits per sample, only 16 is supported");
      wav.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      require(have_fmt, "wav: data chunk before fmt in ", path);
      require(pos + chunk_size <= bytes.size(), "wav: truncated data chunk in ", path);
      std::size_t n = chunk_size / 2;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::int16_t v =
            static_cast<std::int16_t>(get_u16(bytes.data() + pos + 2 * i));
        wav.samples[i] = static_cast<double>(v) / 32767.0;
      }
      return wav;
    }
    pos += chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }
  throw ValidationError(concat("wav: no data chunk found in ", path));
}

}  // namespace s2s
