#pragma once

#include "skqvc/audio.hpp"

#include <vector>

namespace skqvc {

struct StftConfig {
    int    fft    = 1280;
    int    win    = 1280;
    int    hop    = 320;
    int    n_mels = 80;
    double fmin   = 0.0;
    double fmax   = 8000.0;

    void validate() const;
};

struct MelSpectrogram {
    std::vector<double> bins;  // n_mels x frames, frame-major (frame t contiguous)
    int n_mels = 0;
    int frames = 0;
    int frame_hop = HOP_SIZE;

    double at(int mel, int t) const { return bins[(size_t) t * n_mels + mel]; }
    double & at(int mel, int t) { return bins[(size_t) t * n_mels + mel]; }
};

inline constexpr double MEL_LOG_FLOOR = 1e-5;

// Triangular mel filterbank (HTK mel scale), n_mels x (fft/2+1), row-major.
std::vector<double> mel_filterbank(const StftConfig & cfg, int sample_rate = SAMPLE_RATE);

// Center frequency in Hz of each mel filter.
std::vector<double> mel_center_freqs(const StftConfig & cfg);

// Periodic Hann window of the given length.
std::vector<double> hann_window(int n);

// Frame start offset in samples for frame t: frames are centered at
// (t + 0.5) * hop, so the count is exactly floor(L / hop) and independent of
// boundary content under reflect padding.
inline int64_t frame_start(int t, const StftConfig & cfg) {
    return (int64_t) t * cfg.hop + cfg.hop / 2 - cfg.win / 2;
}

// Reflects an out-of-range sample index into [0, len).
int64_t reflect_index(int64_t idx, int64_t len);

// Log-mel spectrogram: |STFT| -> mel filterbank -> ln(clamp(x, 1e-5)).
// frames == floor(L / hop).
MelSpectrogram compute_mel(const Waveform & w, const StftConfig & cfg = {});

// Mean absolute difference between two mel spectrograms (truncates to the
// shorter frame count). This is the L_mel reference used by tests.
double mel_l1(const MelSpectrogram & a, const MelSpectrogram & b);

} // namespace skqvc
