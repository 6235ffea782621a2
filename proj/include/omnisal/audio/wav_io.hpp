#pragma once

#include <string>
#include <vector>

#include "omnisal/audio/foa.hpp"

namespace omnisal::audio {

struct WavData {
  double sample_rate = 0.0;
  std::vector<std::vector<double>> channels;  // deinterleaved, [-1, 1] nominal
};

enum class WavFormat { kPcm16, kPcm24, kFloat32 };

// RIFF/WAVE reader: PCM 16/24-bit and IEEE float32, any channel count.
WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const WavData& data, WavFormat format = WavFormat::kFloat32);

MonoClip read_wav_mono(const std::string& path);
void write_wav_mono(const std::string& path, const MonoClip& clip,
                    WavFormat format = WavFormat::kFloat32);

// 4-channel file as B-format. Stored order is (W, Y, Z, X) by default;
// wxyz_order reinterprets the file as (W, X, Y, Z).
FoaClip read_wav_foa(const std::string& path, bool wxyz_order = false);
void write_wav_foa(const std::string& path, const FoaClip& foa,
                   WavFormat format = WavFormat::kFloat32);

}  // namespace omnisal::audio
