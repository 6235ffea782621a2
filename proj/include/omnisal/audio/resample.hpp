#pragma once

#include "omnisal/audio/foa.hpp"

namespace omnisal::audio {

// Rational-ratio resampling with a Kaiser-windowed sinc kernel
// (beta = 8.6, 32 taps per phase). Kernel weights are renormalized per output
// sample so constants pass through exactly and the same-rate path is the
// identity.
MonoClip resample(const MonoClip& clip, double target_rate);

}  // namespace omnisal::audio
