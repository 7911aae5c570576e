#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "skqvc/codebook.hpp"
#include "support/synth.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

using namespace skqvc;
namespace ts = skqvc::testsupport;

namespace {

FeatureSequence from_points(const std::vector<std::vector<double>> & pts) {
    FeatureSequence f;
    f.dim    = (int) pts[0].size();
    f.frames = (int) pts.size();
    for (const auto & p : pts) f.values.insert(f.values.end(), p.begin(), p.end());
    return f;
}

} // namespace

TEST_CASE("four planted clusters are recovered exactly") {
    Rng rng(17);
    std::vector<std::vector<double>> centers(4, std::vector<double>(8));
    for (auto & c : centers) {
        for (double & v : c) v = rng.uniform(-5.0, 5.0);
    }
    std::vector<std::vector<double>> pts;
    for (int rep = 0; rep < 100; rep++) {
        for (const auto & c : centers) pts.push_back(c);
    }
    const Codebook cb = fit_codebook({from_points(pts)}, 4, 1024, 5);
    CHECK(cb.frozen);
    for (const auto & c : centers) {
        double best = 1e18;
        for (int k = 0; k < cb.K; k++) {
            double d = 0.0;
            for (int i = 0; i < 8; i++) {
                const double diff = c[i] - cb.centroid(k)[i];
                d += diff * diff;
            }
            best = std::min(best, d);
        }
        CHECK(std::sqrt(best) < 1e-6);
    }
}

TEST_CASE("K=1 yields the global mean") {
    Rng rng(21);
    const FeatureSequence f = ts::random_features(rng, 6, 300);
    const Codebook cb = fit_codebook({f}, 1, 1024, 0);
    for (int i = 0; i < 6; i++) {
        double mean = 0.0;
        for (int t = 0; t < 300; t++) mean += f.at(i, t);
        mean /= 300;
        CHECK(cb.centroid(0)[i] == doctest::Approx(mean).epsilon(1e-5));
    }
}

TEST_CASE("fitting is bitwise deterministic for a fixed seed") {
    Rng rng(23);
    const FeatureSequence f = ts::random_features(rng, 12, 2500);   // forces minibatch path
    const Codebook a = fit_codebook({f}, 16, 1024, 99);
    const Codebook b = fit_codebook({f}, 16, 1024, 99);
    CHECK(a.centroids == b.centroids);
    CHECK(a.checksum() == b.checksum());
    const Codebook c = fit_codebook({f}, 16, 1024, 100);
    CHECK(a.centroids != c.centroids);
}

TEST_CASE("centroid rows are distinct") {
    Rng rng(29);
    const FeatureSequence f = ts::random_features(rng, 4, 500);
    const Codebook cb = fit_codebook({f}, 8, 1024, 1);
    for (int a = 0; a < cb.K; a++) {
        for (int b = a + 1; b < cb.K; b++) {
            double d = 0.0;
            for (int i = 0; i < 4; i++) {
                const double diff = cb.centroid(a)[i] - cb.centroid(b)[i];
                d += diff * diff;
            }
            CHECK(d > 0.0);
        }
    }
}

TEST_CASE("quantize matches a brute-force search and copies centroids verbatim") {
    Rng rng(31);
    for (int trial = 0; trial < 10; trial++) {
        const int dim = 1 + (int) rng.next_below(32);
        const int K   = 2 + (int) rng.next_below(63);
        const int T   = 1 + (int) rng.next_below(200);
        Codebook cb;
        cb.K   = K;
        cb.dim = dim;
        cb.frozen = true;
        cb.centroids.resize((size_t) K * dim);
        for (double & v : cb.centroids) v = rng.next_gaussian();
        const FeatureSequence w = ts::random_features(rng, dim, T);

        const QuantizedSequence q = quantize(w, cb);
        for (int t = 0; t < T; t++) {
            int best = 0;
            double best_d = 1e300;
            for (int k = 0; k < K; k++) {
                double d = 0.0;
                for (int i = 0; i < dim; i++) {
                    const double diff = w.at(i, t) - cb.centroid(k)[i];
                    d += diff * diff;
                }
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            REQUIRE(q.indices[t] == best);
            CHECK(std::memcmp(q.frame(t), cb.centroid(best), dim * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("frames equal to a centroid are fixpoints with zero residual") {
    Codebook cb;
    cb.K = 8;
    cb.dim = 3;
    cb.frozen = true;
    Rng rng(37);
    cb.centroids.resize(24);
    for (double & v : cb.centroids) v = rng.next_gaussian();

    FeatureSequence w;
    w.dim = 3;
    w.frames = 1;
    w.values = {cb.centroid(7)[0], cb.centroid(7)[1], cb.centroid(7)[2]};
    const QuantizedSequence q = quantize(w, cb);
    CHECK(q.indices[0] == 7);
    const ResidualSequence s = residual(w, q);
    for (double v : s.values) CHECK(v == 0.0);
}

TEST_CASE("equidistant centroids break ties toward the smaller index") {
    Codebook cb;
    cb.K = 2;
    cb.dim = 1;
    cb.frozen = true;
    cb.centroids = {-1.0, 1.0};
    FeatureSequence w;
    w.dim = 1;
    w.frames = 1;
    w.values = {0.0};
    CHECK(quantize(w, cb).indices[0] == 0);
}

TEST_CASE("residual reconstructs the input bitwise") {
    Rng rng(41);
    for (int trial = 0; trial < 100; trial++) {
        const int dim = 1 + (int) rng.next_below(24);
        const int T   = 1 + (int) rng.next_below(60);
        const int K   = 2 + (int) rng.next_below(16);
        Codebook cb;
        cb.K = K;
        cb.dim = dim;
        cb.frozen = true;
        cb.centroids.resize((size_t) K * dim);
        for (double & v : cb.centroids) v = 3.0 * rng.next_gaussian();
        const FeatureSequence w = ts::random_features(rng, dim, T, 2.0);
        const QuantizedSequence q = quantize(w, cb);
        const ResidualSequence  s = residual(w, q);
        REQUIRE(reconstruct(q, s).values == w.values);
    }
}

TEST_CASE("reconstruct refuses mismatched or stripped residuals") {
    Rng rng(42);
    Codebook cb;
    cb.K = 4;
    cb.dim = 3;
    cb.frozen = true;
    cb.centroids.resize(12);
    for (double & v : cb.centroids) v = rng.next_gaussian();
    const FeatureSequence w = ts::random_features(rng, 3, 5);
    const QuantizedSequence q = quantize(w, cb);
    ResidualSequence s = residual(w, q);
    ResidualSequence stripped = s;
    stripped.comp.clear();
    CHECK_THROWS_AS(reconstruct(q, stripped), ShapeMismatch);
    s.frames = 4;
    s.values.resize(12);
    s.comp.resize(12);
    CHECK_THROWS_AS(reconstruct(q, s), ShapeMismatch);
}

TEST_CASE("per-frame residual norm is minimal over all centroids") {
    Rng rng(43);
    Codebook cb;
    cb.K = 10;
    cb.dim = 5;
    cb.frozen = true;
    cb.centroids.resize(50);
    for (double & v : cb.centroids) v = rng.next_gaussian();
    const FeatureSequence w = ts::random_features(rng, 5, 40);
    const QuantizedSequence q = quantize(w, cb);
    const ResidualSequence  s = residual(w, q);
    for (int t = 0; t < 40; t++) {
        double rn = 0.0;
        for (int i = 0; i < 5; i++) rn += s.at(i, t) * s.at(i, t);
        for (int k = 0; k < 10; k++) {
            double d = 0.0;
            for (int i = 0; i < 5; i++) {
                const double diff = w.at(i, t) - cb.centroid(k)[i];
                d += diff * diff;
            }
            CHECK(rn <= d + 1e-12);
        }
    }
}

TEST_CASE("quantization is idempotent on its own output") {
    Rng rng(47);
    Codebook cb;
    cb.K = 12;
    cb.dim = 6;
    cb.frozen = true;
    cb.centroids.resize(72);
    for (double & v : cb.centroids) v = rng.next_gaussian();
    const FeatureSequence w = ts::random_features(rng, 6, 80);
    const QuantizedSequence q1 = quantize(w, cb);
    FeatureSequence mid;
    mid.dim = 6;
    mid.frames = 80;
    mid.values = q1.vectors;
    const QuantizedSequence q2 = quantize(mid, cb);
    CHECK(q1.indices == q2.indices);
}

TEST_CASE("nested codebooks give non-increasing mean quantization error") {
    Rng rng(53);
    const FeatureSequence f = ts::random_features(rng, 8, 600);
    const Codebook small = fit_codebook({f}, 8, 1024, 3);

    // the double-size codebook contains the small one, so error cannot rise
    Codebook big;
    big.dim = 8;
    big.K = 16;
    big.frozen = true;
    big.centroids = small.centroids;
    for (int extra = 0; extra < 8; extra++) {
        // add the training frame farthest from the current codebook
        int far_t = 0;
        double far_d = -1.0;
        FeatureSequence cur;
        for (int t = 0; t < f.frames; t++) {
            double best = 1e300;
            for (int k = 0; k < 8 + extra; k++) {
                double d = 0.0;
                for (int i = 0; i < 8; i++) {
                    const double diff = f.at(i, t) - big.centroids[(size_t) k * 8 + i];
                    d += diff * diff;
                }
                best = std::min(best, d);
            }
            if (best > far_d) {
                far_d = best;
                far_t = t;
            }
        }
        big.centroids.insert(big.centroids.end(), f.frame(far_t), f.frame(far_t) + 8);
    }
    CHECK(quantization_mse(f, big) <= quantization_mse(f, small) + 1e-6);
}

TEST_CASE("codebook file round trip is bit-exact") {
    const std::string dir = ts::temp_dir("codebook");
    Rng rng(59);
    const FeatureSequence f = ts::random_features(rng, 16, 200);
    const Codebook cb = fit_codebook({f}, 8, 1024, 7);
    write_codebook(dir + "/cb.skqc", cb);
    const Codebook r = load_codebook(dir + "/cb.skqc");
    CHECK(r.K == cb.K);
    CHECK(r.dim == cb.dim);
    CHECK(r.frozen);
    write_codebook(dir + "/cb2.skqc", r);
    std::ifstream a(dir + "/cb.skqc", std::ios::binary), b(dir + "/cb2.skqc", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    // storage is f32, so the fingerprint is stable from the first load onward
    CHECK(load_codebook(dir + "/cb2.skqc").checksum() == r.checksum());
}

TEST_CASE("error paths") {
    Rng rng(61);
    const FeatureSequence f = ts::random_features(rng, 4, 3);
    CHECK_THROWS_AS(fit_codebook({f}, 10, 1024, 0), TooFewFrames);

    FeatureSequence other = ts::random_features(rng, 5, 10);
    CHECK_THROWS_AS(fit_codebook({f, other}, 2, 1024, 0), DimMismatch);

    const Codebook cb = fit_codebook({ts::random_features(rng, 4, 100)}, 2, 1024, 0);
    CHECK_THROWS_AS(quantize(other, cb), DimMismatch);
}
