#pragma once

#include "skqvc/vocoder.hpp"

namespace skqvc {

inline constexpr double LAMBDA_FM_DEFAULT  = 2.0;
inline constexpr double LAMBDA_MEL_DEFAULT = 45.0;

struct LossConfig {
    double lambda_fm  = LAMBDA_FM_DEFAULT;
    double lambda_mel = LAMBDA_MEL_DEFAULT;
    StftConfig mel    = {};
};

struct LossBreakdown {
    double l_adv_g  = 0.0;
    double l_adv_d  = 0.0;
    double l_fm     = 0.0;
    double l_mel    = 0.0;
    double l_g_total = 0.0;

    bool finite() const;
};

// Names of the generator loss terms; the reconstruction-only contract is that
// this registry has exactly these three entries.
const std::vector<std::string> & generator_loss_terms();

// Graph-level losses. `real` must be a constant leaf; `fake` carries the
// generator gradient. Returns the total-loss var and fills the breakdown
// scalars (adv, fm, mel). Fake is trimmed to real's length; a length gap of
// more than one hop raises LengthMismatch.
struct GeneratorLossVars {
    ad::VarId total;
    ad::VarId adv, fm, mel;
};
GeneratorLossVars generator_loss_graph(ad::Graph & g, ad::VarId real, ad::VarId fake,
                                       const DiscriminatorState & d,
                                       const std::vector<ad::VarId> & d_leaves,
                                       const LossConfig & cfg);

ad::VarId discriminator_loss_graph(ad::Graph & g, ad::VarId real, ad::VarId fake_detached,
                                   const DiscriminatorState & d,
                                   const std::vector<ad::VarId> & d_leaves,
                                   const LossConfig & cfg);

// Waveform-level wrappers (forward only), matching the spec operations.
LossBreakdown generator_loss(const Waveform & real, const Waveform & fake,
                             const DiscriminatorState & d, const LossConfig & cfg = {});
double discriminator_loss(const Waveform & real, const Waveform & fake,
                          const DiscriminatorState & d, const LossConfig & cfg = {});

} // namespace skqvc
