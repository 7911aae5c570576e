#pragma once

#include "skqvc/features.hpp"
#include "skqvc/nn.hpp"

namespace skqvc {

// HiFi-GAN V1 layout at desk scale: the upsample schedule multiplies to the
// hop size (320) so T frames always produce exactly T*320 samples.
struct GeneratorConfig {
    int in_dim        = FEATURE_DIM;
    int base_channels = 32;
    std::vector<int> upsample_factors = {8, 5, 4, 2};
    std::vector<int> upsample_kernels = {16, 11, 8, 4};
    std::vector<int> resblock_kernels = {3, 7};
    std::vector<int> resblock_dilations = {1, 3};
    double lrelu_slope = 0.1;

    int hop() const {
        int h = 1;
        for (int f : upsample_factors) h *= f;
        return h;
    }
    void validate() const;
};

struct GeneratorState {
    GeneratorConfig cfg;
    nn::ParamSet params;

    nn::Conv1dLayer conv_pre;
    std::vector<nn::ConvT1dLayer> ups;
    // resblocks[level][kernel][dilation] -> {conv_dilated, conv_plain}
    std::vector<std::vector<std::vector<std::pair<nn::Conv1dLayer, nn::Conv1dLayer>>>> resblocks;
    nn::Conv1dLayer conv_post;

    static GeneratorState init(const GeneratorConfig & cfg, uint64_t seed);

    // z: (1, in_dim, T) -> (1, 1, T*hop)
    ad::VarId forward(ad::Graph & g, const std::vector<ad::VarId> & leaves, ad::VarId z) const;
};

struct DiscriminatorConfig {
    std::vector<int> mpd_periods  = {2, 3, 5, 7, 11};
    std::vector<int> mpd_channels = {8, 16, 32};
    std::vector<int> msd_scales   = {1, 2, 4};
    std::vector<int> msd_channels = {8, 16, 32};
    double lrelu_slope = 0.1;
};

struct SubDiscOutput {
    ad::VarId score;                  // final output map
    std::vector<ad::VarId> features;  // intermediate activations, for L_fm
};

struct DiscriminatorState {
    DiscriminatorConfig cfg;
    nn::ParamSet params;

    // per period: stack of strided convs + post conv
    std::vector<std::vector<nn::Conv1dLayer>> mpd_layers;
    std::vector<std::vector<nn::Conv1dLayer>> msd_layers;

    static DiscriminatorState init(const DiscriminatorConfig & cfg, uint64_t seed);

    // x: (1, 1, L) -> one SubDiscOutput per sub-discriminator (MPD then MSD)
    std::vector<SubDiscOutput> forward(ad::Graph & g, const std::vector<ad::VarId> & leaves,
                                       ad::VarId x) const;
};

// Converts between FeatureSequence (frame-major dim x T) and (1, dim, T) tensors.
ad::Tensor features_to_tensor(const FeatureSequence & f);

// Inference-path generation: deterministic, value-only graph.
Waveform generate(const FeatureSequence & z, const GeneratorState & g);

} // namespace skqvc
