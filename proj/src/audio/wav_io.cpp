#include "omnisal/audio/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace omnisal::audio {

namespace {

constexpr std::uint16_t kFmtPcm = 1;
constexpr std::uint16_t kFmtFloat = 3;
constexpr std::uint16_t kFmtExtensible = 0xFFFE;

template <class T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

template <class T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

double decode_sample(const unsigned char* p, std::uint16_t fmt, int bytes) {
  if (fmt == kFmtFloat && bytes == 4) {
    float f;
    std::memcpy(&f, p, 4);
    return static_cast<double>(f);
  }
  if (fmt == kFmtPcm && bytes == 2) {
    std::int16_t v;
    std::memcpy(&v, p, 2);
    return static_cast<double>(v) / 32768.0;
  }
  if (fmt == kFmtPcm && bytes == 3) {
    std::int32_t v = (p[0] | (p[1] << 8) | (p[2] << 16));
    if (v & 0x800000) v |= ~0xFFFFFF;  // sign extension
    return static_cast<double>(v) / 8388608.0;
  }
  throw DataError("WAV: unsupported sample format");
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0) throw DataError("not a RIFF file: " + path);
  read_le<std::uint32_t>(f);  // riff size
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0) throw DataError("not a WAVE file: " + path);

  std::uint16_t fmt_code = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> payload;
  bool have_fmt = false, have_data = false;
  while (f.read(tag, 4)) {
    const std::uint32_t size = read_le<std::uint32_t>(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      fmt_code = read_le<std::uint16_t>(f);
      channels = read_le<std::uint16_t>(f);
      rate = read_le<std::uint32_t>(f);
      read_le<std::uint32_t>(f);  // byte rate
      read_le<std::uint16_t>(f);  // block align
      bits = read_le<std::uint16_t>(f);
      if (size > 16) {
        std::vector<char> extra(size - 16);
        f.read(extra.data(), static_cast<std::streamsize>(extra.size()));
        if (fmt_code == kFmtExtensible && extra.size() >= 10) {
          // wFormatTag lives in the first two bytes of the GUID's sub-format.
          std::memcpy(&fmt_code, extra.data() + 8, 2);
        }
      }
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      payload.resize(size);
      f.read(payload.data(), static_cast<std::streamsize>(size));
      have_data = true;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);  // chunks are word aligned
    }
  }
  if (!have_fmt || !have_data) throw DataError("WAV: missing fmt or data chunk in " + path);
  if (channels == 0 || rate == 0) throw DataError("WAV: bad fmt chunk in " + path);
  const int bytes = bits / 8;
  if (!((fmt_code == kFmtPcm && (bits == 16 || bits == 24)) ||
        (fmt_code == kFmtFloat && bits == 32))) {
    throw DataError("WAV: unsupported encoding (want PCM16/24 or float32) in " + path);
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(bytes) * channels;
  const std::size_t frames = payload.size() / frame_bytes;
  WavData out;
  out.sample_rate = static_cast<double>(rate);
  out.channels.assign(channels, std::vector<double>(frames));
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      out.channels[c][i] = decode_sample(p + i * frame_bytes + c * bytes, fmt_code, bytes);
    }
  }
  return out;
}

void write_wav(const std::string& path, const WavData& data, WavFormat format) {
  if (data.channels.empty()) throw DataError("write_wav: no channels");
  const std::size_t frames = data.channels[0].size();
  for (const auto& ch : data.channels) {
    if (ch.size() != frames) throw DataError("write_wav: channel length mismatch");
  }
  const int channels = static_cast<int>(data.channels.size());
  const int bytes = format == WavFormat::kPcm16 ? 2 : format == WavFormat::kPcm24 ? 3 : 4;
  const std::uint16_t fmt_code = format == WavFormat::kFloat32 ? kFmtFloat : kFmtPcm;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::llround(data.sample_rate));
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * channels * bytes);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.write("RIFF", 4);
  write_le<std::uint32_t>(f, 36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_le<std::uint32_t>(f, 16);
  write_le<std::uint16_t>(f, fmt_code);
  write_le<std::uint16_t>(f, static_cast<std::uint16_t>(channels));
  write_le<std::uint32_t>(f, rate);
  write_le<std::uint32_t>(f, rate * channels * bytes);
  write_le<std::uint16_t>(f, static_cast<std::uint16_t>(channels * bytes));
  write_le<std::uint16_t>(f, static_cast<std::uint16_t>(bytes * 8));
  f.write("data", 4);
  write_le<std::uint32_t>(f, data_size);
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double v = data.channels[c][i];
      if (format == WavFormat::kFloat32) {
        const float fv = static_cast<float>(v);
        f.write(reinterpret_cast<const char*>(&fv), 4);
      } else if (format == WavFormat::kPcm16) {
        const double clamped = std::clamp(v, -1.0, 1.0);
        const std::int16_t q = static_cast<std::int16_t>(
            std::clamp(std::lround(clamped * 32767.0), -32768L, 32767L));
        write_le<std::int16_t>(f, q);
      } else {
        const double clamped = std::clamp(v, -1.0, 1.0);
        const std::int32_t q = static_cast<std::int32_t>(
            std::clamp(std::lround(clamped * 8388607.0), -8388608L, 8388607L));
        unsigned char b[3] = {static_cast<unsigned char>(q & 0xFF),
                              static_cast<unsigned char>((q >> 8) & 0xFF),
                              static_cast<unsigned char>((q >> 16) & 0xFF)};
        f.write(reinterpret_cast<const char*>(b), 3);
      }
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

MonoClip read_wav_mono(const std::string& path) {
  const WavData data = read_wav(path);
  if (data.channels.size() != 1) {
    throw DataError("expected a mono WAV, got " + std::to_string(data.channels.size()) +
                    " channels: " + path);
  }
  return {data.channels[0], data.sample_rate};
}

void write_wav_mono(const std::string& path, const MonoClip& clip, WavFormat format) {
  WavData data;
  data.sample_rate = clip.sample_rate;
  data.channels = {clip.samples};
  write_wav(path, data, format);
}

FoaClip read_wav_foa(const std::string& path, bool wxyz_order) {
  const WavData data = read_wav(path);
  if (data.channels.size() != 4) {
    throw DataError("expected a 4-channel B-format WAV, got " +
                    std::to_string(data.channels.size()) + " channels: " + path);
  }
  FoaClip foa;
  foa.sample_rate = data.sample_rate;
  if (wxyz_order) {
    foa.w() = data.channels[0];
    foa.x() = data.channels[1];
    foa.y() = data.channels[2];
    foa.z() = data.channels[3];
  } else {
    for (int c = 0; c < 4; ++c) foa.channels[c] = data.channels[c];  // (W, Y, Z, X)
  }
  foa.validate();
  return foa;
}

void write_wav_foa(const std::string& path, const FoaClip& foa, WavFormat format) {
  foa.validate();
  WavData data;
  data.sample_rate = foa.sample_rate;
  data.channels = {foa.w(), foa.y(), foa.z(), foa.x()};
  write_wav(path, data, format);
}

}  // namespace omnisal::audio
