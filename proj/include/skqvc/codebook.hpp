#pragma once

#include "skqvc/features.hpp"

#include <string>
#include <vector>

namespace skqvc {

struct FitMeta {
    uint64_t seed        = 0;
    int      batch_size  = 1024;
    int64_t  n_batches   = 0;
    std::string training_tag;
};

struct Codebook {
    std::vector<double> centroids;  // K x dim, row-major
    int K   = 0;
    int dim = 0;
    bool frozen = false;
    FitMeta fit_meta;

    const double * centroid(int k) const { return centroids.data() + (size_t) k * dim; }
    double * centroid(int k) { return centroids.data() + (size_t) k * dim; }

    // FNV-1a over the raw centroid bytes; the frozen-codebook fingerprint.
    uint64_t checksum() const;
};

struct QuantizedSequence {
    std::vector<double> vectors;   // dim x T, frame-major; each frame a centroid copy
    std::vector<int>    indices;   // T entries in [0, K)
    int dim    = 0;
    int frames = 0;

    const double * frame(int t) const { return vectors.data() + (size_t) t * dim; }
};

struct ResidualSequence {
    std::vector<double> values;    // dim x T, frame-major
    std::vector<double> comp;      // rounding remainders; see reconstruct()
    int dim    = 0;
    int frames = 0;

    const double * frame(int t) const { return values.data() + (size_t) t * dim; }
    double at(int i, int t) const { return values[(size_t) t * dim + i]; }
};

// Minibatch K-means over the concatenated frames of the input sequences.
// Deterministic given seed and stream order; k-means++ init; empty clusters
// are reseeded from the farthest points of the current batch. Falls back to
// full-batch Lloyd iterations when the whole stream fits in one batch.
Codebook fit_codebook(const std::vector<FeatureSequence> & features, int K,
                      int batch_size = 1024, uint64_t seed = 0, int max_iters = 100);

// Eq-style nearest-centroid quantization, exact search, ties broken by the
// smallest centroid index. The selected centroid is copied verbatim.
QuantizedSequence quantize(const FeatureSequence & w, const Codebook & cb);

// S = W - Q. A per-element rounding remainder is kept alongside so the exact
// input can be recovered; see reconstruct().
ResidualSequence residual(const FeatureSequence & w, const QuantizedSequence & q);

// (Q + S) + comp, elementwise; bit-identical to the W the residual came from.
FeatureSequence reconstruct(const QuantizedSequence & q, const ResidualSequence & s);

// Mean per-frame squared quantization error over a sequence.
double quantization_mse(const FeatureSequence & w, const Codebook & cb);

// SKQC codebook file: magic "SKQC", version u16=1, K u32, dim u32, seed u64,
// then K x dim f32 centroids row-major. Round trip is bit-exact.
Codebook load_codebook(const std::string & path);
void write_codebook(const std::string & path, const Codebook & cb);

} // namespace skqvc
