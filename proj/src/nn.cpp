#include "skqvc/nn.hpp"

#include <cmath>

namespace skqvc::nn {

void Adam::step(ParamSet & ps, const ad::Graph & g, const std::vector<ad::VarId> & leaves) {
    t++;
    const double bc1 = 1.0 - std::pow(beta1, (double) t);
    const double bc2 = 1.0 - std::pow(beta2, (double) t);
    for (size_t i = 0; i < ps.size(); i++) {
        Param & p = ps[i];
        const bool has = g.has_grad(leaves[i]);
        const ad::Tensor & grad = has ? g.grad(leaves[i]) : p.m; // unused when !has
        const size_t n = p.value.data.size();
        for (size_t j = 0; j < n; j++) {
            const double gj = has ? grad.data[j] : 0.0;
            p.m.data[j] = beta1 * p.m.data[j] + (1.0 - beta1) * gj;
            p.v.data[j] = beta2 * p.v.data[j] + (1.0 - beta2) * gj * gj;
            const double mhat = p.m.data[j] / bc1;
            const double vhat = p.v.data[j] / bc2;
            p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void init_normal(ad::Tensor & t, Rng & rng, double stddev) {
    for (double & v : t.data) v = rng.next_gaussian() * stddev;
}

void init_fan_in_uniform(ad::Tensor & t, Rng & rng, int fan_in) {
    const double bound = 1.0 / std::sqrt((double) fan_in);
    for (double & v : t.data) v = rng.uniform(-bound, bound);
}

Conv1dLayer Conv1dLayer::make(ParamSet & ps, const std::string & name, int ci, int co, int k,
                              int stride, int pad, int dilation, Rng & rng) {
    Conv1dLayer l;
    l.stride   = stride;
    l.pad      = pad;
    l.dilation = dilation;
    l.w = ps.add(name + ".w", {co, ci, k});
    l.b = ps.add(name + ".b", {co});
    init_normal(ps[l.w].value, rng, 0.01);
    return l;
}

ConvT1dLayer ConvT1dLayer::make(ParamSet & ps, const std::string & name, int ci, int co, int k,
                                int stride, int pad, Rng & rng) {
    ConvT1dLayer l;
    l.stride = stride;
    l.pad    = pad;
    l.w = ps.add(name + ".w", {ci, co, k});
    l.b = ps.add(name + ".b", {co});
    init_normal(ps[l.w].value, rng, 0.01);
    return l;
}

} // namespace skqvc::nn
