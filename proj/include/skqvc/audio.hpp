#pragma once

#include "skqvc/common.hpp"

#include <string>
#include <vector>

namespace skqvc {

inline constexpr int SAMPLE_RATE = 16000;
inline constexpr int HOP_SIZE    = 320;

struct Waveform {
    std::vector<double> samples;   // mono, peak <= 1.0 after loading
    int sample_rate = SAMPLE_RATE;

    size_t length() const { return samples.size(); }
};

// Reads a RIFF/WAVE file (PCM16/PCM32/float32, mono or stereo), downmixes to
// mono, resamples to 16 kHz if needed and peak-normalizes nonzero audio to 1.0.
Waveform load_waveform(const std::string & path);

// Writes mono PCM16 at the waveform's sample rate.
void save_waveform(const std::string & path, const Waveform & w);

// Polyphase windowed-sinc resampler, rate_in -> rate_out.
std::vector<double> resample(const std::vector<double> & x, int rate_in, int rate_out);

// In-place peak normalization; no-op on all-zero input.
void peak_normalize(std::vector<double> & samples);

} // namespace skqvc
