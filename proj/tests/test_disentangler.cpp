#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "skqvc/autodiff.hpp"
#include "skqvc/disentangler.hpp"
#include "support/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace skqvc;
namespace ts = skqvc::testsupport;

namespace {

ResidualSequence random_residual(Rng & rng, int dim, int T) {
    ResidualSequence s;
    s.dim = dim;
    s.frames = T;
    s.values.resize((size_t) dim * T);
    for (double & v : s.values) v = rng.next_gaussian();
    return s;
}

ResidualSequence permute_frames(const ResidualSequence & s, const std::vector<int> & perm) {
    ResidualSequence out = s;
    for (int t = 0; t < s.frames; t++) {
        std::copy(s.frame(perm[t]), s.frame(perm[t]) + s.dim,
                  out.values.begin() + (size_t) t * s.dim);
    }
    return out;
}

Codebook random_codebook(Rng & rng, int K, int dim) {
    Codebook cb;
    cb.K = K;
    cb.dim = dim;
    cb.frozen = true;
    cb.centroids.resize((size_t) K * dim);
    for (double & v : cb.centroids) v = rng.next_gaussian();
    return cb;
}

} // namespace

TEST_CASE("mean of identical columns is that column; permutation invariance; sum oracle") {
    Rng rng(3);
    ResidualSequence s = random_residual(rng, 16, 1);
    ResidualSequence rep;
    rep.dim = 16;
    rep.frames = 9;
    for (int t = 0; t < 9; t++) rep.values.insert(rep.values.end(), s.values.begin(), s.values.end());
    const SpeakerEmbedding e = speaker_embedding(rep);
    for (int i = 0; i < 16; i++) CHECK(e.values[i] == doctest::Approx(s.values[i]).epsilon(1e-12));

    for (int trial = 0; trial < 50; trial++) {
        ResidualSequence r = random_residual(rng, 12, 30);
        std::vector<int> perm(30);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = 29; i > 0; i--) std::swap(perm[i], perm[rng.next_below(i + 1)]);
        CHECK(speaker_embedding(r).values == speaker_embedding(permute_frames(r, perm)).values);
    }

    // high-precision (Kahan) oracle
    ResidualSequence big = random_residual(rng, 1024, 50);
    const SpeakerEmbedding got = speaker_embedding(big);
    for (int i = 0; i < 1024; i += 97) {
        double sum = 0.0, comp = 0.0;
        for (int t = 0; t < 50; t++) {
            const double y = big.at(i, t) - comp;
            const double u = sum + y;
            comp = (u - sum) - y;
            sum = u;
        }
        CHECK(got.values[i] == doctest::Approx(sum / 50).epsilon(1e-6));
    }

    ResidualSequence empty;
    empty.dim = 4;
    CHECK_THROWS_AS(speaker_embedding(empty), EmptySequence);
}

TEST_CASE("time-constant residual maps to the bias column, and svcomp is frame-equivariant") {
    Rng rng(7);
    const DisentanglerParams p = DisentanglerParams::init(1, 16, 4, 12);

    ResidualSequence s = random_residual(rng, 16, 1);
    ResidualSequence rep;
    rep.dim = 16;
    rep.frames = 6;
    for (int t = 0; t < 6; t++) rep.values.insert(rep.values.end(), s.values.begin(), s.values.end());
    const SpeakerEmbedding e = speaker_embedding(rep);
    const VariationEmbedding v = svcomp(rep, e, p);
    for (int t = 0; t < 6; t++) {
        for (int i = 0; i < 4; i++) CHECK(v.at(i, t) == doctest::Approx(p.svcomp_b[i]).epsilon(1e-9));
    }

    for (int trial = 0; trial < 50; trial++) {
        ResidualSequence r = random_residual(rng, 16, 20);
        const SpeakerEmbedding fixed = speaker_embedding(r);
        std::vector<int> perm(20);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = 19; i > 0; i--) std::swap(perm[i], perm[rng.next_below(i + 1)]);
        const VariationEmbedding va = svcomp(r, fixed, p);
        const VariationEmbedding vb = svcomp(permute_frames(r, perm), fixed, p);
        for (int t = 0; t < 20; t++) {
            for (int i = 0; i < 4; i++) REQUIRE(vb.at(i, t) == va.at(i, perm[t]));
        }
    }
}

TEST_CASE("selector projection reproduces the leading residual rows") {
    Rng rng(11);
    DisentanglerParams p;
    p.dim = 16;
    p.d_v = 8;
    p.d_c = 8;
    p.svcomp_w.assign(8 * 16, 0.0);
    p.svcomp_b.assign(8, 0.0);
    p.content_w.assign(8 * 16, 0.0);
    p.content_b.assign(8, 0.0);
    for (int o = 0; o < 8; o++) p.svcomp_w[(size_t) o * 16 + o] = 1.0;

    ResidualSequence s = random_residual(rng, 16, 10);
    const SpeakerEmbedding e = speaker_embedding(s);
    const VariationEmbedding v = svcomp(s, e, p);
    for (int t = 0; t < 10; t++) {
        for (int i = 0; i < 8; i++) {
            CHECK(v.at(i, t) == doctest::Approx(s.at(i, t) - e.values[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("content assembly: selector + zero variation, and the fixed output shape") {
    Rng rng(13);
    DisentanglerParams p;
    p.dim = 16;
    p.d_v = 4;
    p.d_c = 12;
    p.svcomp_w.assign(4 * 16, 0.0);
    p.svcomp_b.assign(4, 0.0);
    p.content_w.assign(12 * 16, 0.0);
    p.content_b.assign(12, 0.0);
    for (int o = 0; o < 12; o++) p.content_w[(size_t) o * 16 + o] = 1.0;

    const Codebook cb = random_codebook(rng, 6, 16);
    const FeatureSequence w = ts::random_features(rng, 16, 7);
    const QuantizedSequence q = quantize(w, cb);
    VariationEmbedding v;
    v.dim = 4;
    v.frames = 7;
    v.values.assign(28, 0.0);

    const ContentEmbedding c = build_content(q, v, p);
    CHECK(c.dim == 16);
    CHECK(c.frames == 7);
    for (int t = 0; t < 7; t++) {
        for (int i = 0; i < 12; i++) CHECK(c.at(i, t) == doctest::Approx(q.frame(t)[i]).epsilon(1e-12));
        for (int i = 12; i < 16; i++) CHECK(c.at(i, t) == 0.0);
    }

    VariationEmbedding bad = v;
    bad.frames = 6;
    bad.values.resize(24);
    CHECK_THROWS_AS(build_content(q, bad, p), LengthMismatch);
}

TEST_CASE("content and variation dims always compose to the feature dim") {
    Rng rng(17);
    const DisentanglerParams p = DisentanglerParams::init(2);   // 1024 / 8 / 1016 defaults
    const Codebook cb = random_codebook(rng, 4, 1024);
    for (int T : {1, 3, 11}) {
        const FeatureSequence w = ts::random_features(rng, 1024, T);
        const DisentangledSpeech d = disentangle(w, cb, p);
        CHECK(d.C.dim == 1024);
        CHECK(d.C.d_c == 1016);
        CHECK(d.V.dim == 8);
        CHECK(d.V.frames == T);
        CHECK(d.C.frames == T);
    }
}

TEST_CASE("recombine identities") {
    Rng rng(19);
    ContentEmbedding c;
    c.dim = 8;
    c.d_c = 6;
    c.frames = 5;
    c.values.resize(40);
    for (double & v : c.values) v = rng.next_gaussian();

    SpeakerEmbedding zero;
    zero.dim = 8;
    zero.values.assign(8, 0.0);
    const FeatureSequence same = recombine(c, zero);
    for (int t = 0; t < 5; t++) {
        for (int i = 0; i < 8; i++) CHECK(same.at(i, t) == c.at(i, t));
    }

    SpeakerEmbedding a, b;
    a.dim = b.dim = 8;
    a.values.resize(8);
    b.values.resize(8);
    for (double & v : a.values) v = rng.next_gaussian();
    for (double & v : b.values) v = rng.next_gaussian();
    const FeatureSequence ra = recombine(c, a);
    const FeatureSequence rb = recombine(c, b);
    for (int t = 0; t < 5; t++) {
        for (int i = 0; i < 8; i++) {
            CHECK(ra.at(i, t) - rb.at(i, t) == doctest::Approx(a.values[i] - b.values[i]).epsilon(1e-12));
        }
    }

    ContentEmbedding zc = c;
    std::fill(zc.values.begin(), zc.values.end(), 0.0);
    const FeatureSequence rs = recombine(zc, a);
    for (int t = 0; t < 5; t++) {
        for (int i = 0; i < 8; i++) CHECK(rs.at(i, t) == a.values[i]);
    }

    SpeakerEmbedding wrong;
    wrong.dim = 7;
    wrong.values.assign(7, 0.0);
    CHECK_THROWS_AS(recombine(c, wrong), DimMismatch);
}

TEST_CASE("composition equals the manual pipeline bitwise") {
    Rng rng(23);
    const DisentanglerParams p = DisentanglerParams::init(3, 16, 4, 12);
    const Codebook cb = random_codebook(rng, 8, 16);
    const FeatureSequence w = ts::random_features(rng, 16, 25);

    const DisentangledSpeech d = disentangle(w, cb, p);
    const QuantizedSequence q = quantize(w, cb);
    const ResidualSequence  s = residual(w, q);
    const SpeakerEmbedding  e = speaker_embedding(s);
    const VariationEmbedding v = svcomp(s, e, p);
    const ContentEmbedding  c = build_content(q, v, p);

    CHECK(d.Q.indices == q.indices);
    CHECK(d.S.values == s.values);
    CHECK(d.S_avg.values == e.values);
    CHECK(d.V.values == v.values);
    CHECK(d.C.values == c.values);
}

TEST_CASE("all-centroid input has zero residual and bias-only variation") {
    Rng rng(29);
    const DisentanglerParams p = DisentanglerParams::init(4, 16, 4, 12);
    const Codebook cb = random_codebook(rng, 8, 16);
    FeatureSequence w;
    w.dim = 16;
    w.frames = 5;
    for (int t = 0; t < 5; t++) {
        const int k = (int) rng.next_below(8);
        w.values.insert(w.values.end(), cb.centroid(k), cb.centroid(k) + 16);
    }
    const DisentangledSpeech d = disentangle(w, cb, p);
    for (double v : d.S.values) CHECK(v == 0.0);
    for (double v : d.S_avg.values) CHECK(v == 0.0);
    for (int t = 0; t < 5; t++) {
        for (int i = 0; i < 4; i++) CHECK(d.V.at(i, t) == p.svcomp_b[i]);
    }
}

TEST_CASE("projection gradients match central finite differences") {
    // scalar loss: mean squared output of the two bottleneck projections on a
    // toy 8-dim, 4-frame instance
    Rng rng(31);
    const int dim = 8, d_v = 2, d_c = 6, T = 4;
    ad::Tensor x({1, dim, T}), sw({d_v, dim}), sb({d_v}), cw({d_c, dim}), cbv({d_c});
    for (double & v : x.data)  v = rng.next_gaussian();
    for (double & v : sw.data) v = rng.next_gaussian();
    for (double & v : sb.data) v = rng.next_gaussian();
    for (double & v : cw.data) v = rng.next_gaussian();
    for (double & v : cbv.data) v = rng.next_gaussian();

    auto loss_value = [&](const ad::Tensor & swv, const ad::Tensor & cwv) {
        ad::Graph g(false);
        const auto xv = g.constant(x);
        const auto v  = g.linear1x1(xv, g.constant(swv), g.constant(sb));
        const auto c  = g.linear1x1(xv, g.constant(cwv), g.constant(cbv));
        const auto l  = g.weighted_sum({g.mse_to_const(v, 0.0), g.mse_to_const(c, 0.0)}, {1.0, 1.0});
        return g.scalar(l);
    };

    ad::Graph g;
    const auto xv = g.constant(x);
    const auto swl = g.leaf(sw, true);
    const auto cwl = g.leaf(cw, true);
    const auto v  = g.linear1x1(xv, swl, g.constant(sb));
    const auto c  = g.linear1x1(xv, cwl, g.constant(cbv));
    const auto l  = g.weighted_sum({g.mse_to_const(v, 0.0), g.mse_to_const(c, 0.0)}, {1.0, 1.0});
    g.backward(l);

    const double h = 1e-6;
    for (size_t i = 0; i < sw.data.size(); i += 3) {
        ad::Tensor plus = sw, minus = sw;
        plus.data[i] += h;
        minus.data[i] -= h;
        const double fd = (loss_value(plus, cw) - loss_value(minus, cw)) / (2 * h);
        const double an = g.grad(swl).data[i];
        CHECK(std::fabs(fd - an) <= 1e-4 * std::max(1.0, std::fabs(fd)));
    }
    for (size_t i = 0; i < cw.data.size(); i += 5) {
        ad::Tensor plus = cw, minus = cw;
        plus.data[i] += h;
        minus.data[i] -= h;
        const double fd = (loss_value(sw, plus) - loss_value(sw, minus)) / (2 * h);
        const double an = g.grad(cwl).data[i];
        CHECK(std::fabs(fd - an) <= 1e-4 * std::max(1.0, std::fabs(fd)));
    }
}
