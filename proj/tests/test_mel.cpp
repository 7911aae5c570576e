#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "skqvc/fft.hpp"
#include "support/synth.hpp"

#include <cmath>

using namespace skqvc;
namespace ts = skqvc::testsupport;

TEST_CASE("all-zero input yields the log floor everywhere") {
    Waveform w;
    w.samples.assign(3200, 0.0);
    const MelSpectrogram m = compute_mel(w);
    CHECK(m.n_mels == 80);
    CHECK(m.frames == 10);
    const double floor_val = std::log(MEL_LOG_FLOOR);
    for (double v : m.bins) CHECK(v == doctest::Approx(floor_val));
}

TEST_CASE("frame count is floor(L / hop) across lengths") {
    for (int L = 320; L <= 32000; L += 320) {
        Waveform w;
        w.samples.assign(L, 0.01);
        CHECK(compute_mel(w).frames == L / 320);
    }
    Waveform w;
    w.samples.assign(16000, 0.01);
    CHECK(compute_mel(w).frames == 50);
}

TEST_CASE("440 Hz sine peaks in the mel bin nearest 440 Hz, against a DFT oracle") {
    const StftConfig cfg;
    const Waveform w = ts::sine_wave(440.0, 1.0);
    const MelSpectrogram m = compute_mel(w, cfg);

    std::vector<double> avg(m.n_mels, 0.0);
    for (int t = 0; t < m.frames; t++) {
        for (int i = 0; i < m.n_mels; i++) avg[i] += m.at(i, t);
    }
    int argmax = 0;
    for (int i = 1; i < m.n_mels; i++) {
        if (avg[i] > avg[argmax]) argmax = i;
    }

    const std::vector<double> centers = mel_center_freqs(cfg);
    int nearest = 0;
    for (int i = 1; i < (int) centers.size(); i++) {
        if (std::fabs(centers[i] - 440.0) < std::fabs(centers[nearest] - 440.0)) nearest = i;
    }
    CHECK(argmax == nearest);

    // direct DFT-magnitude oracle on one interior frame: energy concentrates at 440 Hz
    const std::vector<double> win = hann_window(cfg.win);
    std::vector<double> frame(cfg.fft, 0.0);
    const int64_t start = frame_start(20, cfg);
    for (int n = 0; n < cfg.win; n++) {
        frame[n] = w.samples[reflect_index(start + n, (int64_t) w.samples.size())] * win[n];
    }
    std::vector<double> spec(2 * (cfg.fft / 2 + 1));
    rfft(frame.data(), spec.data(), cfg.fft);
    int peak_bin = 0;
    double peak = 0.0;
    for (int k = 0; k <= cfg.fft / 2; k++) {
        const double mag = std::hypot(spec[2 * k], spec[2 * k + 1]);
        if (mag > peak) {
            peak = mag;
            peak_bin = k;
        }
    }
    CHECK(std::fabs(peak_bin * (double) SAMPLE_RATE / cfg.fft - 440.0) < (double) SAMPLE_RATE / cfg.fft);
}

TEST_CASE("config validation rejects bad shapes") {
    StftConfig bad;
    bad.hop = bad.win + 1;
    CHECK_THROWS_AS(bad.validate(), InvalidConfig);
    StftConfig bad2;
    bad2.n_mels = 0;
    CHECK_THROWS_AS(bad2.validate(), InvalidConfig);
}

TEST_CASE("random audio produces only finite values") {
    Rng rng(7);
    for (int trial = 0; trial < 5; trial++) {
        Waveform w;
        w.samples.resize(1600 + 320 * trial);
        for (double & s : w.samples) s = rng.uniform(-1.0, 1.0);
        const MelSpectrogram m = compute_mel(w);
        for (double v : m.bins) CHECK(std::isfinite(v));
    }
}

TEST_CASE("mel_l1 is zero on identical input and truncates to the shorter") {
    const Waveform w = ts::sine_wave(330.0, 0.5);
    const MelSpectrogram a = compute_mel(w);
    CHECK(mel_l1(a, a) == 0.0);

    MelSpectrogram b = a;
    b.frames += 2;
    b.bins.resize((size_t) b.n_mels * b.frames, 3.7);
    CHECK(mel_l1(a, b) == 0.0);   // truncates to the shorter spectrogram
}

TEST_CASE("rfft adjoint satisfies the dot-product identity") {
    Rng rng(99);
    const int n = 64;
    std::vector<double> x(n), gy(2 * (n / 2 + 1));
    for (double & v : x) v = rng.next_gaussian();
    for (double & v : gy) v = rng.next_gaussian();

    std::vector<double> y(2 * (n / 2 + 1)), gx(n);
    rfft(x.data(), y.data(), n);
    rfft_adjoint(gy.data(), gx.data(), n);

    double lhs = 0.0, rhs = 0.0;
    for (size_t i = 0; i < y.size(); i++) lhs += y[i] * gy[i];
    for (int i = 0; i < n; i++) rhs += x[i] * gx[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}
