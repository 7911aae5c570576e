#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "skqvc/eval.hpp"
#include "support/synth.hpp"

#include <algorithm>
#include <cmath>

using namespace skqvc;
namespace ts = skqvc::testsupport;

TEST_CASE("a 200 Hz sine tracks within 3 Hz on at least 90% of frames") {
    const Waveform w = ts::sine_wave(200.0, 1.0);
    const F0Track track = extract_f0(w);
    int voiced = 0, close = 0;
    for (double f : track.values) {
        if (f > 0.0) {
            voiced++;
            if (std::fabs(f - 200.0) <= 3.0) close++;
        }
    }
    CHECK(voiced >= (int) (0.9 * track.frames()));
    CHECK(close >= (int) (0.9 * voiced));
}

TEST_CASE("white noise is mostly unvoiced, silence entirely so") {
    Rng rng(3);
    Waveform noise;
    noise.samples.resize(16000);
    for (double & s : noise.samples) s = rng.uniform(-0.8, 0.8);
    const F0Track nt = extract_f0(noise);
    int unvoiced = 0;
    for (double f : nt.values) unvoiced += f == 0.0;
    CHECK(unvoiced >= (int) (0.8 * nt.frames()));

    Waveform silence;
    silence.samples.assign(8000, 0.0);
    for (double f : extract_f0(silence).values) CHECK(f == 0.0);
}

TEST_CASE("too-short audio is rejected; voiced frames stay in band") {
    Waveform w;
    w.samples.assign(1279, 0.5);
    CHECK_THROWS_AS(extract_f0(w), AudioTooShort);

    const F0Track t = extract_f0(ts::synth_voice(1, 140.0, 260.0, {650, 1100, 2500}, 1.0));
    for (double f : t.values) {
        CHECK(f >= 0.0);
        if (f > 0.0) {
            CHECK(f >= F0_MIN_HZ);
            CHECK(f <= F0_MAX_HZ);
        }
    }
}

TEST_CASE("self-correlation is one, and correlation is affine-invariant") {
    const Waveform w = ts::synth_voice(2, 130.0, 220.0, {650, 1100, 2500}, 1.0);
    const F0Track a = extract_f0(w);
    CHECK(f0_pcc(a, a) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f0_pcc(w, w) == doctest::Approx(1.0).epsilon(1e-9));

    F0Track shifted = a;
    for (double & f : shifted.values) {
        if (f > 0.0) f = 1.3 * f + 17.0;
    }
    CHECK(f0_pcc(a, shifted) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("independent random contours are nearly uncorrelated at the 95th percentile") {
    Rng rng(5);
    std::vector<double> abs_pcc;
    for (int trial = 0; trial < 100; trial++) {
        F0Track a, b;
        a.values.resize(500);
        b.values.resize(500);
        for (int t = 0; t < 500; t++) {
            a.values[t] = rng.uniform(80.0, 300.0);
            b.values[t] = rng.uniform(80.0, 300.0);
        }
        abs_pcc.push_back(std::fabs(f0_pcc(a, b)));
    }
    std::sort(abs_pcc.begin(), abs_pcc.end());
    CHECK(abs_pcc[94] < 0.15);
}

TEST_CASE("insufficient voiced overlap is an error") {
    F0Track a, b;
    a.values = {100.0, 0.0, 120.0, 0.0};
    b.values = {0.0, 110.0, 0.0, 130.0};
    CHECK_THROWS_AS(f0_pcc(a, b), InsufficientVoicedOverlap);
    F0Track c;
    c.values = {100.0};
    CHECK_THROWS_AS(f0_pcc(c, c), InsufficientVoicedOverlap);
}

TEST_CASE("code agreement: identity is one, and it is symmetric") {
    const Waveform a = ts::synth_voice(3, 150.0, 170.0, {650, 1100, 2500}, 0.5);
    const Waveform b = ts::synth_voice(4, 210.0, 180.0, {600, 1400, 2300}, 0.5);
    PseudoEncoderConfig enc;
    enc.seed = 1;
    const Codebook cb = fit_codebook({pseudo_encode(a, enc), pseudo_encode(b, enc)}, 16, 1024, 2);
    CHECK(code_agreement(a, a, cb, enc) == 1.0);
    CHECK(code_agreement(a, b, cb, enc) == code_agreement(b, a, cb, enc));
}

TEST_CASE("speaker cosine: identity and symmetry; degenerate embeddings rank at chance") {
    const Waveform a = ts::synth_voice(5, 150.0, 170.0, {650, 1100, 2500}, 0.5);
    const Waveform b = ts::synth_voice(6, 210.0, 180.0, {600, 1400, 2300}, 0.5);
    PseudoEncoderConfig enc;
    enc.seed = 2;
    // a codebook NOT fitted on these clips, so the mean residual is non-trivial
    Rng crng(77);
    Codebook cb;
    cb.K = 16;
    cb.dim = enc.out_dim;
    cb.frozen = true;
    cb.centroids.resize((size_t) cb.K * cb.dim);
    for (double & v : cb.centroids) v = crng.next_gaussian();
    CHECK(speaker_cosine(a, a, cb, enc) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(speaker_cosine(a, b, cb, enc) == speaker_cosine(b, a, cb, enc));

    FeatureSequence fz;
    fz.dim = 4;
    fz.frames = 2;
    fz.values = {1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0};
    Codebook exact;
    exact.K = 1;
    exact.dim = 4;
    exact.frozen = true;
    exact.centroids = {1.0, 2.0, 3.0, 4.0};   // residual becomes exactly zero
    const DisentanglerParams p = DisentanglerParams::init(1, 4, 2, 2);
    // degenerate (all-zero) embeddings rank at chance instead of erroring
    CHECK(speaker_auc({"a", "a", "b"}, {fz, fz, fz}, exact, p) == 0.5);
}

TEST_CASE("speaker auc separates the toy speakers") {
    const std::string dir = ts::temp_dir("eval_auc");
    ts::make_toy_corpus(dir + "/data", 3, 4, 0.5);
    PseudoEncoderConfig enc;
    enc.seed = 3;
    std::vector<FeatureSequence> feats;
    std::vector<std::string> labels;
    std::vector<std::string> files;
    for (const auto & e : std::filesystem::directory_iterator(dir + "/data")) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto & f : files) {
        feats.push_back(pseudo_encode(load_waveform(f), enc));
        const std::string stem = std::filesystem::path(f).stem().string();
        labels.push_back(stem.substr(0, stem.find('_')));
    }
    // codebook not fitted on these clips: the mean residual then keeps each
    // speaker's spectral offset instead of the shared prosody pattern
    Rng crng(88);
    Codebook cb;
    cb.K = 8;
    cb.dim = enc.out_dim;
    cb.frozen = true;
    cb.centroids.resize((size_t) cb.K * cb.dim);
    for (double & v : cb.centroids) v = crng.next_gaussian();
    const double auc = speaker_auc(labels, feats, cb, DisentanglerParams::init(1));
    CHECK(auc > 0.5);
}

TEST_CASE("sweep emits one row per cell with finite metrics") {
    const std::string dir = ts::temp_dir("eval_sweep");
    ts::make_toy_corpus(dir + "/data", 2, 3, 0.4);
    TrainConfig base;
    base.gen.in_dim = 16;
    base.gen.base_channels = 8;
    base.gen.upsample_factors = {8, 8, 5};
    base.gen.upsample_kernels = {16, 16, 15};
    base.d_v = 4;
    base.disc.mpd_periods = {2};
    base.disc.mpd_channels = {4};
    base.disc.msd_scales = {1};
    base.disc.msd_channels = {4};
    base.segment_frames = 8;
    base.seed = 7;

    const auto rows = sweep_codebook_sizes({4, 8}, {VariationMode::svcomp, VariationMode::off},
                                           dir + "/data", 2, base);
    REQUIRE(rows.size() == 4);
    for (const auto & r : rows) {
        CHECK((r.K == 4 || r.K == 8));
        CHECK(std::isfinite(r.recon_mel_l1));
        CHECK(std::isfinite(r.code_agreement));
        CHECK(std::isfinite(r.quant_mse));
    }
    // quantization error cannot rise with more centroids at fixed features
    double mse4 = 0.0, mse8 = 0.0;
    for (const auto & r : rows) {
        if (r.K == 4) mse4 = r.quant_mse;
        if (r.K == 8) mse8 = r.quant_mse;
    }
    CHECK(mse8 <= mse4 + 1e-9);

    const std::string csv = sweep_to_csv(rows);
    CHECK(csv.rfind("K,svcomp,recon_mel_l1,f0_pcc,code_agreement,quant_mse\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("ablation harness produces the four standard rows") {
    const std::string dir = ts::temp_dir("eval_ablate");
    ts::make_toy_corpus(dir + "/data", 2, 3, 0.4);
    TrainConfig base;
    base.gen.in_dim = 16;
    base.gen.base_channels = 8;
    base.gen.upsample_factors = {8, 8, 5};
    base.gen.upsample_kernels = {16, 16, 15};
    base.d_v = 4;
    base.disc.mpd_periods = {2};
    base.disc.mpd_channels = {4};
    base.disc.msd_scales = {1};
    base.disc.msd_channels = {4};
    base.segment_frames = 8;
    base.seed = 9;

    const auto rows = run_ablations(dir + "/data", 1, base);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].name == "full");
    CHECK(rows[1].name == "no_bottleneck");
    CHECK(rows[2].name == "no_deltas");
    CHECK(rows[3].name == "external_speaker");
    for (const auto & r : rows) {
        CHECK(std::isfinite(r.recon_mel_l1));
        CHECK(std::isfinite(r.code_agreement));
        CHECK(std::isfinite(r.speaker_auc));
    }
    const std::string csv = ablations_to_csv(rows);
    CHECK(csv.rfind("name,recon_mel_l1,f0_pcc,code_agreement,speaker_auc\n", 0) == 0);
}
