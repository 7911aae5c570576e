#pragma once

#include "skqvc/autodiff.hpp"
#include "skqvc/common.hpp"

#include <string>
#include <vector>

namespace skqvc::nn {

// Named parameter with inline Adam state.
struct Param {
    std::string name;
    ad::Tensor  value;
    ad::Tensor  m, v;   // first/second moment estimates
};

struct ParamSet {
    std::vector<Param> params;

    int add(const std::string & name, std::vector<int64_t> shape) {
        Param p;
        p.name  = name;
        p.value = ad::Tensor(shape);
        p.m     = ad::Tensor(shape);
        p.v     = ad::Tensor(std::move(shape));
        params.push_back(std::move(p));
        return (int) params.size() - 1;
    }

    Param & operator[](int i) { return params[i]; }
    const Param & operator[](int i) const { return params[i]; }
    size_t size() const { return params.size(); }

    int find(const std::string & name) const {
        for (size_t i = 0; i < params.size(); i++) {
            if (params[i].name == name) return (int) i;
        }
        return -1;
    }

    // registers every parameter as a graph leaf; index-aligned with params
    std::vector<ad::VarId> leaves(ad::Graph & g, bool requires_grad) const {
        std::vector<ad::VarId> out;
        out.reserve(params.size());
        for (const auto & p : params) out.push_back(g.leaf(p.value, requires_grad));
        return out;
    }

    uint64_t checksum() const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto & p : params) h = fnv1a64(p.value.data, h);
        return h;
    }
};

// Adam with exponential lr decay applied externally via set_lr.
struct Adam {
    double lr   = 2e-4;
    double beta1 = 0.8;
    double beta2 = 0.99;
    double eps  = 1e-8;
    int64_t t   = 0;

    void step(ParamSet & ps, const ad::Graph & g, const std::vector<ad::VarId> & leaves);
};

// init helpers
void init_normal(ad::Tensor & t, Rng & rng, double stddev);
void init_fan_in_uniform(ad::Tensor & t, Rng & rng, int fan_in);

// layer handles into a ParamSet
struct Conv1dLayer {
    int w = -1, b = -1;
    int stride = 1, pad = 0, dilation = 1;

    static Conv1dLayer make(ParamSet & ps, const std::string & name, int ci, int co, int k,
                            int stride, int pad, int dilation, Rng & rng);
    ad::VarId apply(ad::Graph & g, const std::vector<ad::VarId> & L, ad::VarId x) const {
        return g.conv1d(x, L[w], L[b], stride, pad, dilation);
    }
};

struct ConvT1dLayer {
    int w = -1, b = -1;
    int stride = 1, pad = 0;

    static ConvT1dLayer make(ParamSet & ps, const std::string & name, int ci, int co, int k,
                             int stride, int pad, Rng & rng);
    ad::VarId apply(ad::Graph & g, const std::vector<ad::VarId> & L, ad::VarId x) const {
        return g.conv_transpose1d(x, L[w], L[b], stride, pad);
    }
};

} // namespace skqvc::nn
