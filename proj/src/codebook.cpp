#include "skqvc/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace skqvc {

namespace {

constexpr char     SKQC_MAGIC[4] = {'S', 'K', 'Q', 'C'};
constexpr uint16_t SKQC_VERSION  = 1;
constexpr double   CONVERGE_TOL  = 1e-4;

double sq_dist(const double * a, const double * b, int dim) {
    double acc = 0.0;
    for (int i = 0; i < dim; i++) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

int nearest(const double * x, const std::vector<double> & centroids, int K, int dim,
            double * best_dist = nullptr) {
    int best = 0;
    double bd = sq_dist(x, centroids.data(), dim);
    for (int k = 1; k < K; k++) {
        const double d = sq_dist(x, centroids.data() + (size_t) k * dim, dim);
        if (d < bd) { bd = d; best = k; }
    }
    if (best_dist) *best_dist = bd;
    return best;
}

// k-means++ seeding over the frame pointers
std::vector<double> kmeanspp_init(const std::vector<const double *> & frames, int K, int dim, Rng & rng) {
    const size_t N = frames.size();
    std::vector<double> centroids((size_t) K * dim);
    std::vector<double> d2(N, std::numeric_limits<double>::infinity());

    size_t first = rng.next_below(N);
    std::memcpy(centroids.data(), frames[first], sizeof(double) * dim);

    for (int k = 1; k < K; k++) {
        const double * prev = centroids.data() + (size_t) (k - 1) * dim;
        double total = 0.0;
        for (size_t i = 0; i < N; i++) {
            d2[i] = std::min(d2[i], sq_dist(frames[i], prev, dim));
            total += d2[i];
        }
        size_t pick = 0;
        if (total > 0.0) {
            double r = rng.next_double() * total;
            double acc = 0.0;
            for (size_t i = 0; i < N; i++) {
                acc += d2[i];
                if (acc >= r) { pick = i; break; }
            }
        } else {
            pick = rng.next_below(N);
        }
        std::memcpy(centroids.data() + (size_t) k * dim, frames[pick], sizeof(double) * dim);
    }
    return centroids;
}

// Ensures no duplicate centroid rows by reseeding from the frames farthest
// from their assigned centroid.
void dedupe_centroids(std::vector<double> & centroids, int K, int dim,
                      const std::vector<const double *> & frames) {
    for (int a = 0; a < K; a++) {
        for (int b = a + 1; b < K; b++) {
            if (sq_dist(centroids.data() + (size_t) a * dim,
                        centroids.data() + (size_t) b * dim, dim) > 0.0) {
                continue;
            }
            double worst = -1.0;
            size_t pick = 0;
            for (size_t i = 0; i < frames.size(); i++) {
                double d;
                nearest(frames[i], centroids, K, dim, &d);
                if (d > worst) { worst = d; pick = i; }
            }
            std::memcpy(centroids.data() + (size_t) b * dim, frames[pick], sizeof(double) * dim);
        }
    }
}

} // namespace

uint64_t Codebook::checksum() const {
    uint64_t h = fnv1a64(&K, sizeof(K));
    h = fnv1a64(&dim, sizeof(dim), h);
    return fnv1a64(centroids.data(), centroids.size() * sizeof(double), h);
}

Codebook fit_codebook(const std::vector<FeatureSequence> & features, int K,
                      int batch_size, uint64_t seed, int max_iters) {
    if (K < 1) throw InvalidConfig("fit_codebook: K < 1");
    if (batch_size < 1) throw InvalidConfig("fit_codebook: batch_size < 1");

    int dim = -1;
    std::vector<const double *> frames;
    for (const auto & f : features) {
        if (dim < 0) dim = f.dim;
        if (f.dim != dim) throw DimMismatch("fit_codebook: mixed feature dims in stream");
        for (int t = 0; t < f.frames; t++) frames.push_back(f.frame(t));
    }
    const size_t N = frames.size();
    if ((int64_t) N < K) throw TooFewFrames("fit_codebook: " + std::to_string(N) + " frames < K=" + std::to_string(K));

    Rng rng(seed);
    std::vector<double> centroids = kmeanspp_init(frames, K, dim, rng);

    int64_t n_batches = 0;

    if (N <= (size_t) batch_size) {
        // full-batch Lloyd
        std::vector<int> assign(N);
        for (int iter = 0; iter < max_iters; iter++) {
            for (size_t i = 0; i < N; i++) assign[i] = nearest(frames[i], centroids, K, dim);

            std::vector<double> sums((size_t) K * dim, 0.0);
            std::vector<int64_t> counts(K, 0);
            for (size_t i = 0; i < N; i++) {
                double * s = sums.data() + (size_t) assign[i] * dim;
                for (int d = 0; d < dim; d++) s[d] += frames[i][d];
                counts[assign[i]]++;
            }
            double max_shift = 0.0;
            for (int k = 0; k < K; k++) {
                double * c = centroids.data() + (size_t) k * dim;
                if (counts[k] == 0) {
                    // reseed from the farthest point
                    double worst = -1.0;
                    size_t pick = 0;
                    for (size_t i = 0; i < N; i++) {
                        double d;
                        nearest(frames[i], centroids, K, dim, &d);
                        if (d > worst) { worst = d; pick = i; }
                    }
                    std::memcpy(c, frames[pick], sizeof(double) * dim);
                    max_shift = std::numeric_limits<double>::infinity();
                    continue;
                }
                double shift = 0.0;
                for (int d = 0; d < dim; d++) {
                    const double nv = sums[(size_t) k * dim + d] / counts[k];
                    const double dd = nv - c[d];
                    shift += dd * dd;
                    c[d] = nv;
                }
                max_shift = std::max(max_shift, std::sqrt(shift));
            }
            n_batches++;
            if (max_shift < CONVERGE_TOL) break;
        }
    } else {
        // minibatch with per-center counts (sklearn-style learning rate 1/count)
        std::vector<int64_t> counts(K, 0);
        std::vector<size_t> order(N);
        std::iota(order.begin(), order.end(), 0);

        for (int epoch = 0; epoch < max_iters; epoch++) {
            // seeded Fisher-Yates shuffle, then sequential batches
            for (size_t i = N - 1; i > 0; i--) {
                std::swap(order[i], order[rng.next_below(i + 1)]);
            }
            const std::vector<double> before = centroids;
            for (size_t b0 = 0; b0 < N; b0 += batch_size) {
                const size_t b1 = std::min(N, b0 + batch_size);
                for (size_t i = b0; i < b1; i++) {
                    const double * x = frames[order[i]];
                    const int k = nearest(x, centroids, K, dim);
                    counts[k]++;
                    const double eta = 1.0 / counts[k];
                    double * c = centroids.data() + (size_t) k * dim;
                    for (int d = 0; d < dim; d++) c[d] += eta * (x[d] - c[d]);
                }
                // reseed clusters that have never received a sample
                for (int k = 0; k < K; k++) {
                    if (counts[k] != 0) continue;
                    double worst = -1.0;
                    size_t pick = b0;
                    for (size_t i = b0; i < b1; i++) {
                        double d;
                        nearest(frames[order[i]], centroids, K, dim, &d);
                        if (d > worst) { worst = d; pick = i; }
                    }
                    std::memcpy(centroids.data() + (size_t) k * dim, frames[order[pick]], sizeof(double) * dim);
                    counts[k] = 1;
                }
                n_batches++;
            }
            double max_shift = 0.0;
            for (int k = 0; k < K; k++) {
                max_shift = std::max(max_shift, std::sqrt(sq_dist(
                    centroids.data() + (size_t) k * dim, before.data() + (size_t) k * dim, dim)));
            }
            if (max_shift < CONVERGE_TOL) break;
        }
    }

    dedupe_centroids(centroids, K, dim, frames);

    Codebook cb;
    cb.centroids = std::move(centroids);
    cb.K      = K;
    cb.dim    = dim;
    cb.frozen = true;
    cb.fit_meta = {seed, batch_size, n_batches, ""};
    return cb;
}

QuantizedSequence quantize(const FeatureSequence & w, const Codebook & cb) {
    if (w.dim != cb.dim) {
        throw DimMismatch("quantize: feature dim " + std::to_string(w.dim) +
                          " != codebook dim " + std::to_string(cb.dim));
    }
    QuantizedSequence q;
    q.dim    = w.dim;
    q.frames = w.frames;
    q.indices.resize(w.frames);
    q.vectors.resize((size_t) w.dim * w.frames);
    for (int t = 0; t < w.frames; t++) {
        const int k = nearest(w.frame(t), cb.centroids, cb.K, cb.dim);
        q.indices[t] = k;
        std::memcpy(q.vectors.data() + (size_t) t * w.dim, cb.centroid(k), sizeof(double) * w.dim);
    }
    return q;
}

ResidualSequence residual(const FeatureSequence & w, const QuantizedSequence & q) {
    if (w.dim != q.dim || w.frames != q.frames) throw ShapeMismatch("residual: W and Q shapes differ");
    ResidualSequence s;
    s.dim    = w.dim;
    s.frames = w.frames;
    s.values.resize(w.values.size());
    s.comp.resize(w.values.size());
    for (size_t i = 0; i < w.values.size(); i++) {
        const double wv = w.values[i], qv = q.vectors[i];
        const double sv = wv - qv;
        const double dv = qv + sv;
        // remainder of the rounded round trip; (qv + sv) + cv lands exactly
        // on wv (walk by ulps in the rare case one subtraction is not enough)
        double cv = wv - dv;
        for (int it = 0; it < 8 && dv + cv != wv; it++) {
            cv = std::nextafter(cv, dv + cv < wv ? std::numeric_limits<double>::infinity()
                                                 : -std::numeric_limits<double>::infinity());
        }
        s.values[i] = sv;
        s.comp[i] = cv;
    }
    return s;
}

FeatureSequence reconstruct(const QuantizedSequence & q, const ResidualSequence & s) {
    if (q.dim != s.dim || q.frames != s.frames) throw ShapeMismatch("reconstruct: Q and S shapes differ");
    if (s.comp.size() != s.values.size()) throw ShapeMismatch("reconstruct: residual is missing its remainders");
    FeatureSequence w;
    w.dim = q.dim;
    w.frames = q.frames;
    w.values.resize(s.values.size());
    for (size_t i = 0; i < s.values.size(); i++) {
        w.values[i] = (q.vectors[i] + s.values[i]) + s.comp[i];
    }
    return w;
}

double quantization_mse(const FeatureSequence & w, const Codebook & cb) {
    if (w.frames == 0) throw EmptySequence("quantization_mse: no frames");
    double acc = 0.0;
    for (int t = 0; t < w.frames; t++) {
        double d;
        nearest(w.frame(t), cb.centroids, cb.K, cb.dim, &d);
        acc += d;
    }
    return acc / w.frames;
}

Codebook load_codebook(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UnreadableFile("cannot open codebook file: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const size_t header = 4 + 2 + 4 + 4 + 8;
    if (buf.size() < header || std::memcmp(buf.data(), SKQC_MAGIC, 4) != 0) {
        throw BadMagic("not an SKQC file: " + path);
    }
    uint16_t version; std::memcpy(&version, buf.data() + 4, 2);
    uint32_t K, dim;  std::memcpy(&K, buf.data() + 6, 4); std::memcpy(&dim, buf.data() + 10, 4);
    uint64_t seed;    std::memcpy(&seed, buf.data() + 14, 8);
    if (version != SKQC_VERSION) throw BadMagic("SKQC version unsupported");
    if (buf.size() - header != (size_t) K * dim * 4) throw DimMismatch("SKQC payload size mismatch");

    Codebook cb;
    cb.K   = (int) K;
    cb.dim = (int) dim;
    cb.frozen = true;
    cb.fit_meta.seed = seed;
    cb.centroids.resize((size_t) K * dim);
    for (size_t i = 0; i < cb.centroids.size(); i++) {
        float v;
        std::memcpy(&v, buf.data() + header + i * 4, 4);
        if (!std::isfinite(v)) throw NonFiniteValue("SKQC non-finite centroid in " + path);
        cb.centroids[i] = v;
    }
    return cb;
}

void write_codebook(const std::string & path, const Codebook & cb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UnreadableFile("cannot open for writing: " + path);
    out.write(SKQC_MAGIC, 4);
    const uint16_t version = SKQC_VERSION;
    const uint32_t K = (uint32_t) cb.K, dim = (uint32_t) cb.dim;
    const uint64_t seed = cb.fit_meta.seed;
    out.write(reinterpret_cast<const char *>(&version), 2);
    out.write(reinterpret_cast<const char *>(&K), 4);
    out.write(reinterpret_cast<const char *>(&dim), 4);
    out.write(reinterpret_cast<const char *>(&seed), 8);
    for (double v : cb.centroids) {
        const float fv = (float) v;
        out.write(reinterpret_cast<const char *>(&fv), 4);
    }
}

} // namespace skqvc
