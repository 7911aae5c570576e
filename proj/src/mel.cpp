#include "skqvc/mel.hpp"

#include "skqvc/fft.hpp"

#include <algorithm>
#include <cmath>

namespace skqvc {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

} // namespace

void StftConfig::validate() const {
    if (hop > win)   throw InvalidConfig("stft: hop > win");
    if (n_mels < 1)  throw InvalidConfig("stft: n_mels < 1");
    if (win > fft)   throw InvalidConfig("stft: win > fft");
    if (hop < 1)     throw InvalidConfig("stft: hop < 1");
    if (fmax <= fmin) throw InvalidConfig("stft: fmax <= fmin");
}

std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; i++) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
    }
    return w;
}

std::vector<double> mel_center_freqs(const StftConfig & cfg) {
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> centers(cfg.n_mels);
    for (int m = 0; m < cfg.n_mels; m++) {
        centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1));
    }
    return centers;
}

std::vector<double> mel_filterbank(const StftConfig & cfg, int sample_rate) {
    const int n_bins = cfg.fft / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);

    // n_mels + 2 edge points, triangles between consecutive triples
    std::vector<double> edges(cfg.n_mels + 2);
    for (int m = 0; m < cfg.n_mels + 2; m++) {
        edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1));
    }

    std::vector<double> fb((size_t) cfg.n_mels * n_bins, 0.0);
    for (int m = 0; m < cfg.n_mels; m++) {
        const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < n_bins; k++) {
            const double f = (double) k * sample_rate / cfg.fft;
            double v = 0.0;
            if (f > lo && f < c) {
                v = (f - lo) / (c - lo);
            } else if (f >= c && f < hi) {
                v = (hi - f) / (hi - c);
            }
            fb[(size_t) m * n_bins + k] = v;
        }
    }
    return fb;
}

int64_t reflect_index(int64_t idx, int64_t len) {
    if (len == 1) return 0;
    while (idx < 0 || idx >= len) {
        if (idx < 0)    idx = -idx;
        if (idx >= len) idx = 2 * len - 2 - idx;
    }
    return idx;
}

MelSpectrogram compute_mel(const Waveform & w, const StftConfig & cfg) {
    cfg.validate();
    if (w.samples.empty()) throw EmptyAudio("compute_mel: empty waveform");

    const int64_t L = (int64_t) w.samples.size();
    const int frames = (int) (L / cfg.hop);
    const int n_bins = cfg.fft / 2 + 1;

    const std::vector<double> window = hann_window(cfg.win);
    const std::vector<double> fb     = mel_filterbank(cfg, w.sample_rate);

    MelSpectrogram mel;
    mel.n_mels    = cfg.n_mels;
    mel.frames    = frames;
    mel.frame_hop = cfg.hop;
    mel.bins.assign((size_t) cfg.n_mels * frames, 0.0);

    std::vector<double> frame(cfg.fft, 0.0);
    std::vector<double> spec(2 * n_bins);
    std::vector<double> mag(n_bins);

    for (int t = 0; t < frames; t++) {
        const int64_t start = frame_start(t, cfg);
        std::fill(frame.begin(), frame.end(), 0.0);
        for (int i = 0; i < cfg.win; i++) {
            frame[i] = w.samples[reflect_index(start + i, L)] * window[i];
        }
        rfft(frame.data(), spec.data(), cfg.fft);
        for (int k = 0; k < n_bins; k++) {
            mag[k] = std::sqrt(spec[2 * k] * spec[2 * k] + spec[2 * k + 1] * spec[2 * k + 1]);
        }
        for (int m = 0; m < cfg.n_mels; m++) {
            const double * row = fb.data() + (size_t) m * n_bins;
            double acc = 0.0;
            for (int k = 0; k < n_bins; k++) acc += row[k] * mag[k];
            mel.at(m, t) = std::log(std::max(acc, MEL_LOG_FLOOR));
        }
    }
    return mel;
}

double mel_l1(const MelSpectrogram & a, const MelSpectrogram & b) {
    if (a.n_mels != b.n_mels) throw ShapeMismatch("mel_l1: n_mels differ");
    const int frames = std::min(a.frames, b.frames);
    if (frames == 0) throw EmptySequence("mel_l1: no frames");
    double acc = 0.0;
    for (int t = 0; t < frames; t++) {
        for (int m = 0; m < a.n_mels; m++) {
            acc += std::fabs(a.at(m, t) - b.at(m, t));
        }
    }
    return acc / ((double) frames * a.n_mels);
}

} // namespace skqvc
