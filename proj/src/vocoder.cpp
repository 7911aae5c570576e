#include "skqvc/vocoder.hpp"

#include <cmath>

namespace skqvc {

void GeneratorConfig::validate() const {
    if (hop() != HOP_SIZE) {
        throw InvalidConfig("generator: upsample factors must multiply to " + std::to_string(HOP_SIZE));
    }
    if (upsample_factors.size() != upsample_kernels.size()) {
        throw InvalidConfig("generator: factor/kernel count mismatch");
    }
    for (size_t i = 0; i < upsample_factors.size(); i++) {
        if ((upsample_kernels[i] - upsample_factors[i]) % 2 != 0) {
            throw InvalidConfig("generator: (kernel - factor) must be even for exact upsampling");
        }
    }
    if (base_channels < (1 << upsample_factors.size())) {
        throw InvalidConfig("generator: base_channels too small for the halving schedule");
    }
}

GeneratorState GeneratorState::init(const GeneratorConfig & cfg, uint64_t seed) {
    cfg.validate();
    GeneratorState s;
    s.cfg = cfg;
    Rng rng(seed);

    int ch = cfg.base_channels;
    s.conv_pre = nn::Conv1dLayer::make(s.params, "g.conv_pre", cfg.in_dim, ch, 7, 1, 3, 1, rng);

    const int n_up = (int) cfg.upsample_factors.size();
    for (int i = 0; i < n_up; i++) {
        const int f = cfg.upsample_factors[i];
        const int k = cfg.upsample_kernels[i];
        const int co = ch / 2;
        s.ups.push_back(nn::ConvT1dLayer::make(
            s.params, "g.up" + std::to_string(i), ch, co, k, f, (k - f) / 2, rng));
        ch = co;

        std::vector<std::vector<std::pair<nn::Conv1dLayer, nn::Conv1dLayer>>> level;
        for (size_t rk = 0; rk < cfg.resblock_kernels.size(); rk++) {
            const int kr = cfg.resblock_kernels[rk];
            std::vector<std::pair<nn::Conv1dLayer, nn::Conv1dLayer>> block;
            for (size_t di = 0; di < cfg.resblock_dilations.size(); di++) {
                const int d = cfg.resblock_dilations[di];
                const std::string base =
                    "g.res" + std::to_string(i) + "_" + std::to_string(rk) + "_" + std::to_string(di);
                block.emplace_back(
                    nn::Conv1dLayer::make(s.params, base + "a", ch, ch, kr, 1, (kr - 1) * d / 2, d, rng),
                    nn::Conv1dLayer::make(s.params, base + "b", ch, ch, kr, 1, (kr - 1) / 2, 1, rng));
            }
            level.push_back(std::move(block));
        }
        s.resblocks.push_back(std::move(level));
    }
    s.conv_post = nn::Conv1dLayer::make(s.params, "g.conv_post", ch, 1, 7, 1, 3, 1, rng);
    return s;
}

ad::VarId GeneratorState::forward(ad::Graph & g, const std::vector<ad::VarId> & L, ad::VarId z) const {
    const double slope = cfg.lrelu_slope;
    ad::VarId x = conv_pre.apply(g, L, z);
    for (size_t i = 0; i < ups.size(); i++) {
        x = g.leaky_relu(x, slope);
        x = ups[i].apply(g, L, x);

        // MRF: average the residual stacks over the kernel set
        ad::VarId acc = -1;
        for (const auto & block : resblocks[i]) {
            ad::VarId h = x;
            for (const auto & [conv_a, conv_b] : block) {
                ad::VarId y = g.leaky_relu(h, slope);
                y = conv_a.apply(g, L, y);
                y = g.leaky_relu(y, slope);
                y = conv_b.apply(g, L, y);
                h = g.add(h, y);
            }
            acc = acc < 0 ? h : g.add(acc, h);
        }
        x = g.scale(acc, 1.0 / resblocks[i].size());
    }
    x = g.leaky_relu(x, slope);
    x = conv_post.apply(g, L, x);
    return g.tanh_act(x);
}

DiscriminatorState DiscriminatorState::init(const DiscriminatorConfig & cfg, uint64_t seed) {
    DiscriminatorState s;
    s.cfg = cfg;
    Rng rng(seed);

    for (size_t pi = 0; pi < cfg.mpd_periods.size(); pi++) {
        std::vector<nn::Conv1dLayer> layers;
        int ci = 1;
        for (size_t li = 0; li < cfg.mpd_channels.size(); li++) {
            const int co = cfg.mpd_channels[li];
            layers.push_back(nn::Conv1dLayer::make(
                s.params, "d.mpd" + std::to_string(pi) + "_" + std::to_string(li),
                ci, co, 5, 3, 2, 1, rng));
            ci = co;
        }
        layers.push_back(nn::Conv1dLayer::make(
            s.params, "d.mpd" + std::to_string(pi) + "_post", ci, 1, 3, 1, 1, 1, rng));
        s.mpd_layers.push_back(std::move(layers));
    }

    for (size_t si = 0; si < cfg.msd_scales.size(); si++) {
        std::vector<nn::Conv1dLayer> layers;
        const std::string base = "d.msd" + std::to_string(si);
        layers.push_back(nn::Conv1dLayer::make(s.params, base + "_0", 1, cfg.msd_channels[0], 15, 1, 7, 1, rng));
        int ci = cfg.msd_channels[0];
        for (size_t li = 1; li < cfg.msd_channels.size(); li++) {
            const int co = cfg.msd_channels[li];
            layers.push_back(nn::Conv1dLayer::make(
                s.params, base + "_" + std::to_string(li), ci, co, 9, 2, 4, 1, rng));
            ci = co;
        }
        layers.push_back(nn::Conv1dLayer::make(s.params, base + "_pre_post", ci, ci, 5, 1, 2, 1, rng));
        layers.push_back(nn::Conv1dLayer::make(s.params, base + "_post", ci, 1, 3, 1, 1, 1, rng));
        s.msd_layers.push_back(std::move(layers));
    }
    return s;
}

std::vector<SubDiscOutput> DiscriminatorState::forward(ad::Graph & g,
                                                       const std::vector<ad::VarId> & L,
                                                       ad::VarId x) const {
    const double slope = cfg.lrelu_slope;
    std::vector<SubDiscOutput> out;

    for (size_t pi = 0; pi < mpd_layers.size(); pi++) {
        SubDiscOutput sub;
        ad::VarId h = g.phase_split(x, cfg.mpd_periods[pi]);
        const auto & layers = mpd_layers[pi];
        for (size_t li = 0; li < layers.size(); li++) {
            h = layers[li].apply(g, L, h);
            if (li + 1 < layers.size()) h = g.leaky_relu(h, slope);
            sub.features.push_back(h);
        }
        sub.score = h;
        out.push_back(std::move(sub));
    }

    for (size_t si = 0; si < msd_layers.size(); si++) {
        SubDiscOutput sub;
        ad::VarId h = x;
        for (int scale = cfg.msd_scales[si]; scale > 1; scale /= 2) {
            h = g.avg_pool1d(h, 4, 2, 2);
        }
        const auto & layers = msd_layers[si];
        for (size_t li = 0; li < layers.size(); li++) {
            h = layers[li].apply(g, L, h);
            if (li + 1 < layers.size()) h = g.leaky_relu(h, slope);
            sub.features.push_back(h);
        }
        sub.score = h;
        out.push_back(std::move(sub));
    }
    return out;
}

ad::Tensor features_to_tensor(const FeatureSequence & f) {
    ad::Tensor t({1, f.dim, f.frames});
    for (int i = 0; i < f.dim; i++) {
        for (int tt = 0; tt < f.frames; tt++) {
            t.data[(size_t) i * f.frames + tt] = f.at(i, tt);
        }
    }
    return t;
}

Waveform generate(const FeatureSequence & z, const GeneratorState & gen) {
    if (z.dim != gen.cfg.in_dim) {
        throw DimMismatch("generate: feature dim " + std::to_string(z.dim) +
                          " != generator input dim " + std::to_string(gen.cfg.in_dim));
    }
    ad::Graph g(/*grad_enabled=*/false);
    const std::vector<ad::VarId> L = gen.params.leaves(g, false);
    const ad::VarId zt  = g.leaf(features_to_tensor(z), false);
    const ad::VarId out = gen.forward(g, L, zt);

    Waveform w;
    w.sample_rate = SAMPLE_RATE;
    w.samples     = g.value(out).data;
    return w;
}

} // namespace skqvc
