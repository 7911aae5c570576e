#include "skqvc/losses.hpp"

#include <cmath>
#include <cstdlib>

namespace skqvc {

namespace {

ad::VarId wave_leaf(ad::Graph & g, const Waveform & w) {
    ad::Tensor t({1, 1, (int64_t) w.samples.size()});
    t.data = w.samples;
    return g.leaf(std::move(t), false);
}

// trims fake to real's length; throws when the gap exceeds one hop
ad::VarId align_fake(ad::Graph & g, ad::VarId real, ad::VarId fake, int hop) {
    const int64_t lr = g.value(real).dim(2);
    const int64_t lf = g.value(fake).dim(2);
    if (std::llabs(lf - lr) > hop) {
        throw LengthMismatch("loss: real/fake lengths differ by more than one hop (" +
                             std::to_string(lr) + " vs " + std::to_string(lf) + ")");
    }
    if (lf == lr) return fake;
    if (lf > lr) return g.slice_time(fake, 0, lr);
    throw LengthMismatch("loss: fake shorter than real");
}

} // namespace

bool LossBreakdown::finite() const {
    return std::isfinite(l_adv_g) && std::isfinite(l_adv_d) && std::isfinite(l_fm) &&
           std::isfinite(l_mel) && std::isfinite(l_g_total);
}

const std::vector<std::string> & generator_loss_terms() {
    static const std::vector<std::string> terms = {"adv", "fm", "mel"};
    return terms;
}

GeneratorLossVars generator_loss_graph(ad::Graph & g, ad::VarId real, ad::VarId fake,
                                       const DiscriminatorState & d,
                                       const std::vector<ad::VarId> & d_leaves,
                                       const LossConfig & cfg) {
    fake = align_fake(g, real, fake, cfg.mel.hop);

    const auto subs_real = d.forward(g, d_leaves, real);   // real path carries no generator grad
    const auto subs_fake = d.forward(g, d_leaves, fake);

    // LSGAN generator objective: sum over sub-discriminators of mean (D(fake) - 1)^2
    std::vector<ad::VarId> adv_terms;
    std::vector<ad::VarId> fm_terms;
    for (size_t i = 0; i < subs_fake.size(); i++) {
        adv_terms.push_back(g.mse_to_const(subs_fake[i].score, 1.0));
        for (size_t li = 0; li < subs_fake[i].features.size(); li++) {
            fm_terms.push_back(g.l1_mean(subs_real[i].features[li], subs_fake[i].features[li]));
        }
    }
    const std::vector<double> ones_adv(adv_terms.size(), 1.0);
    const std::vector<double> ones_fm(fm_terms.size(), 1.0);

    GeneratorLossVars out;
    out.adv = g.weighted_sum(adv_terms, ones_adv);
    out.fm  = g.weighted_sum(fm_terms, ones_fm);
    out.mel = g.l1_mean(g.log_mel(real, cfg.mel), g.log_mel(fake, cfg.mel));
    out.total = g.weighted_sum({out.adv, out.fm, out.mel}, {1.0, cfg.lambda_fm, cfg.lambda_mel});
    return out;
}

ad::VarId discriminator_loss_graph(ad::Graph & g, ad::VarId real, ad::VarId fake_detached,
                                   const DiscriminatorState & d,
                                   const std::vector<ad::VarId> & d_leaves,
                                   const LossConfig & cfg) {
    const ad::VarId fake = align_fake(g, real, fake_detached, cfg.mel.hop);
    const auto subs_real = d.forward(g, d_leaves, real);
    const auto subs_fake = d.forward(g, d_leaves, fake);

    std::vector<ad::VarId> terms;
    for (size_t i = 0; i < subs_real.size(); i++) {
        terms.push_back(g.mse_to_const(subs_real[i].score, 1.0));
        terms.push_back(g.mse_to_const(subs_fake[i].score, 0.0));
    }
    return g.weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

LossBreakdown generator_loss(const Waveform & real, const Waveform & fake,
                             const DiscriminatorState & d, const LossConfig & cfg) {
    ad::Graph g(/*grad_enabled=*/false);
    const auto d_leaves = d.params.leaves(g, false);
    const ad::VarId rv = wave_leaf(g, real);
    const ad::VarId fv = wave_leaf(g, fake);
    const auto vars = generator_loss_graph(g, rv, fv, d, d_leaves, cfg);

    LossBreakdown out;
    out.l_adv_g  = g.scalar(vars.adv);
    out.l_fm     = g.scalar(vars.fm);
    out.l_mel    = g.scalar(vars.mel);
    out.l_g_total = g.scalar(vars.total);
    out.l_adv_d  = 0.0;
    return out;
}

double discriminator_loss(const Waveform & real, const Waveform & fake,
                          const DiscriminatorState & d, const LossConfig & cfg) {
    ad::Graph g(/*grad_enabled=*/false);
    const auto d_leaves = d.params.leaves(g, false);
    const ad::VarId rv = wave_leaf(g, real);
    const ad::VarId fv = wave_leaf(g, fake);
    return g.scalar(discriminator_loss_graph(g, rv, fv, d, d_leaves, cfg));
}

} // namespace skqvc
