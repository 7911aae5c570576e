#pragma once

#include "skqvc/codebook.hpp"

namespace skqvc {

inline constexpr int VARIATION_DIM = 8;     // d_v
inline constexpr int CONTENT_DIM   = 1016;  // d_c, so that d_c + d_v == 1024

struct SpeakerEmbedding {
    std::vector<double> values;  // dim
    int dim = 0;
};

struct VariationEmbedding {
    std::vector<double> values;  // d_v x T, frame-major
    int dim = 0;                 // d_v
    int frames = 0;

    double at(int i, int t) const { return values[(size_t) t * dim + i]; }
};

struct ContentEmbedding {
    // rows [0, d_c) from the content bottleneck, rows [d_c, dim) from V
    std::vector<double> values;  // dim x T, frame-major
    int dim = 0;
    int d_c = 0;
    int frames = 0;

    double at(int i, int t) const { return values[(size_t) t * dim + i]; }
};

// Per-frame affine maps (kernel-1 1D convolutions): svcomp dim -> d_v and
// content dim -> d_c. Weights row-major (out x in).
struct DisentanglerParams {
    std::vector<double> svcomp_w, svcomp_b;     // d_v x dim, d_v
    std::vector<double> content_w, content_b;   // d_c x dim, d_c
    int dim = FEATURE_DIM;
    int d_v = VARIATION_DIM;
    int d_c = CONTENT_DIM;
    bool trainable = true;

    // fan-in scaled uniform init, seeded
    static DisentanglerParams init(uint64_t seed, int dim = FEATURE_DIM,
                                   int d_v = VARIATION_DIM, int d_c = CONTENT_DIM);
};

struct DisentangledSpeech {
    ContentEmbedding   C;
    SpeakerEmbedding   S_avg;
    // diagnostics
    QuantizedSequence  Q;
    ResidualSequence   S;
    VariationEmbedding V;
};

// S_avg[i] = mean over t of S[i, t]
SpeakerEmbedding speaker_embedding(const ResidualSequence & s);

// V[:,t] = svcomp_w (S[:,t] - s_avg) + svcomp_b, purely per frame
VariationEmbedding svcomp(const ResidualSequence & s, const SpeakerEmbedding & s_avg,
                          const DisentanglerParams & p);

// C = concat_rows(content_w Q + content_b, V)
ContentEmbedding build_content(const QuantizedSequence & q, const VariationEmbedding & v,
                               const DisentanglerParams & p);

// decoder input: C[:,t] + s_avg broadcast over time
FeatureSequence recombine(const ContentEmbedding & c, const SpeakerEmbedding & s_avg);

// quantize -> residual -> speaker_embedding -> svcomp -> build_content
DisentangledSpeech disentangle(const FeatureSequence & w, const Codebook & cb,
                               const DisentanglerParams & p);

} // namespace skqvc
