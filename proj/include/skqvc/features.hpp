#pragma once

#include "skqvc/mel.hpp"

#include <string>
#include <vector>

namespace skqvc {

inline constexpr int FEATURE_DIM  = 1024;
inline constexpr int FEATURE_RATE = 50;   // frames per second at 16 kHz / hop 320

struct FeatureSequence {
    std::vector<double> values;   // dim x T, frame-major (frame t contiguous)
    int dim    = FEATURE_DIM;
    int frames = 0;
    std::string source_tag;

    double at(int i, int t) const { return values[(size_t) t * dim + i]; }
    double & at(int i, int t) { return values[(size_t) t * dim + i]; }
    const double * frame(int t) const { return values.data() + (size_t) t * dim; }
    double * frame(int t) { return values.data() + (size_t) t * dim; }
};

// SKQF feature file: magic "SKQF", version u16=1, dim u32, frames u32,
// dtype u8=0 (f32), 3 reserved zero bytes, then frames x dim f32 frame-major.
FeatureSequence load_features(const std::string & path);
void write_features(const std::string & path, const FeatureSequence & f);

struct PseudoEncoderConfig {
    uint64_t seed       = 0;
    int      out_dim    = FEATURE_DIM;
    bool     use_deltas = true;   // false is the encoder-layer ablation stand-in
    StftConfig stft     = {};
};

// Deterministic desk-scale encoder: log-mel + first-order deltas, projected to
// out_dim with a fixed seeded random matrix scaled by 1/sqrt(in_rows).
FeatureSequence pseudo_encode(const Waveform & w, const PseudoEncoderConfig & cfg);
FeatureSequence pseudo_encode(const Waveform & w, uint64_t seed);

} // namespace skqvc
