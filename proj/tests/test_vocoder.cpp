#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "skqvc/vocoder.hpp"
#include "support/synth.hpp"

#include <cmath>

using namespace skqvc;
namespace ts = skqvc::testsupport;

namespace {

// tiny generator so forward passes stay fast
GeneratorConfig tiny_gen() {
    GeneratorConfig cfg;
    cfg.in_dim = 16;
    cfg.base_channels = 8;
    cfg.upsample_factors = {8, 8, 5};
    cfg.upsample_kernels = {16, 16, 15};
    return cfg;
}

} // namespace

TEST_CASE("output length is exactly frames * 320") {
    const GeneratorConfig cfg = tiny_gen();
    CHECK(cfg.hop() == 320);
    const GeneratorState gen = GeneratorState::init(cfg, 1);
    Rng rng(5);
    for (int T : {1, 2, 3, 5, 9, 50}) {
        const FeatureSequence z = ts::random_features(rng, 16, T);
        CHECK(generate(z, gen).samples.size() == (size_t) T * 320);
    }
}

TEST_CASE("generation is bitwise deterministic") {
    const GeneratorState gen = GeneratorState::init(tiny_gen(), 2);
    Rng rng(7);
    const FeatureSequence z = ts::random_features(rng, 16, 6);
    CHECK(generate(z, gen).samples == generate(z, gen).samples);
}

TEST_CASE("doubling the input doubles the output length exactly") {
    const GeneratorState gen = GeneratorState::init(tiny_gen(), 3);
    Rng rng(9);
    const FeatureSequence z = ts::random_features(rng, 16, 4);
    FeatureSequence zz = z;
    zz.frames = 8;
    zz.values.insert(zz.values.end(), z.values.begin(), z.values.end());
    CHECK(generate(zz, gen).samples.size() == 2 * generate(z, gen).samples.size());
}

TEST_CASE("wrong feature dim is rejected") {
    const GeneratorState gen = GeneratorState::init(tiny_gen(), 4);
    Rng rng(11);
    const FeatureSequence z = ts::random_features(rng, 17, 3);
    CHECK_THROWS_AS(generate(z, gen), DimMismatch);
}

TEST_CASE("config validation enforces the hop product and kernel parity") {
    GeneratorConfig bad = tiny_gen();
    bad.upsample_factors = {8, 5, 4};   // product 160 != 320
    bad.upsample_kernels = {16, 11, 8};
    CHECK_THROWS_AS(bad.validate(), InvalidConfig);

    GeneratorConfig odd = tiny_gen();
    odd.upsample_kernels = {16, 15, 10};   // (15 - 8) not even
    CHECK_THROWS_AS(odd.validate(), InvalidConfig);
}

TEST_CASE("generator output stays in tanh range and finite") {
    const GeneratorState gen = GeneratorState::init(tiny_gen(), 5);
    Rng rng(13);
    const FeatureSequence z = ts::random_features(rng, 16, 10, 2.0);
    const Waveform w = generate(z, gen);
    for (double s : w.samples) {
        CHECK(std::isfinite(s));
        CHECK(std::fabs(s) <= 1.0);
    }
}

TEST_CASE("discriminators expose scores and feature maps for every sub-network") {
    DiscriminatorConfig cfg;
    const DiscriminatorState disc = DiscriminatorState::init(cfg, 6);
    Rng rng(15);

    ad::Graph g(false);
    ad::Tensor x({1, 1, 2000});
    for (double & v : x.data) v = 0.3 * rng.next_gaussian();
    const auto outs = disc.forward(g, disc.params.leaves(g, false), g.constant(x));

    CHECK(outs.size() == cfg.mpd_periods.size() + cfg.msd_scales.size());
    for (const auto & o : outs) {
        CHECK(!o.features.empty());
        for (double v : g.value(o.score).data) CHECK(std::isfinite(v));
        for (const auto f : o.features) {
            for (double v : g.value(f).data) CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("every parameter is finite after init") {
    const GeneratorState gen = GeneratorState::init(tiny_gen(), 7);
    for (const auto & p : gen.params.params) {
        for (double v : p.value.data) CHECK(std::isfinite(v));
    }
    const DiscriminatorState disc = DiscriminatorState::init({}, 8);
    for (const auto & p : disc.params.params) {
        for (double v : p.value.data) CHECK(std::isfinite(v));
    }
}
