#include "skqvc/autodiff.hpp"

#include "skqvc/fft.hpp"

#include <algorithm>
#include <cmath>

namespace skqvc::ad {

namespace {

void check(bool ok, const char * msg) {
    if (!ok) throw ShapeMismatch(msg);
}

int64_t conv_out_len(int64_t t, int k, int stride, int pad, int dilation) {
    return (t + 2 * (int64_t) pad - (int64_t) dilation * (k - 1) - 1) / stride + 1;
}

} // namespace

VarId Graph::push(Tensor value, bool requires_grad, std::function<void(Graph &)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return (VarId) nodes_.size() - 1;
}

VarId Graph::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

Tensor & Graph::grad_buf(VarId id) {
    Node & n = nodes_[id];
    if (n.grad.data.empty()) {
        n.grad = Tensor(n.value.shape);
    }
    return n.grad;
}

const Tensor & Graph::grad(VarId id) const {
    return nodes_[id].grad;
}

void Graph::backward(VarId loss) {
    check(nodes_[loss].value.numel() == 1, "backward: loss is not a scalar");
    grad_buf(loss).data[0] += 1.0;
    for (VarId id = loss; id >= 0; id--) {
        Node & n = nodes_[id];
        if (n.back && !n.grad.data.empty()) n.back(*this);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

VarId Graph::add(VarId a, VarId b) {
    check(nodes_[a].value.shape == nodes_[b].value.shape, "add: shape mismatch");
    Tensor out = nodes_[a].value;
    const auto & bv = nodes_[b].value.data;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] += bv[i];
    const bool rg = requires_grad(a) || requires_grad(b);
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), rg, [a, b, id](Graph & g) {
        const auto & go = g.grad(id).data;
        for (VarId in : {a, b}) {
            if (!g.requires_grad(in)) continue;
            double * gi = g.grad_data(in);
            for (size_t i = 0; i < go.size(); i++) gi[i] += go[i];
        }
    });
}

VarId Graph::sub(VarId a, VarId b) {
    check(nodes_[a].value.shape == nodes_[b].value.shape, "sub: shape mismatch");
    Tensor out = nodes_[a].value;
    const auto & bv = nodes_[b].value.data;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] -= bv[i];
    const bool rg = requires_grad(a) || requires_grad(b);
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), rg, [a, b, id](Graph & g) {
        const auto & go = g.grad(id).data;
        if (g.requires_grad(a)) {
            double * gi = g.grad_data(a);
            for (size_t i = 0; i < go.size(); i++) gi[i] += go[i];
        }
        if (g.requires_grad(b)) {
            double * gi = g.grad_data(b);
            for (size_t i = 0; i < go.size(); i++) gi[i] -= go[i];
        }
    });
}

VarId Graph::scale(VarId a, double s) {
    Tensor out = nodes_[a].value;
    for (double & v : out.data) v *= s;
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(a), [a, s, id](Graph & g) {
        if (!g.requires_grad(a)) return;
        const auto & go = g.grad(id).data;
        double * gi = g.grad_data(a);
        for (size_t i = 0; i < go.size(); i++) gi[i] += s * go[i];
    });
}

VarId Graph::leaky_relu(VarId x, double slope) {
    Tensor out = nodes_[x].value;
    for (double & v : out.data) {
        if (v < 0.0) v *= slope;
    }
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, slope, id](Graph & g) {
        if (!g.requires_grad(x)) return;
        const auto & go = g.grad(id).data;
        const auto & xv = g.value(x).data;
        double * gi = g.grad_data(x);
        for (size_t i = 0; i < go.size(); i++) {
            gi[i] += go[i] * (xv[i] >= 0.0 ? 1.0 : slope);
        }
    });
}

VarId Graph::tanh_act(VarId x) {
    Tensor out = nodes_[x].value;
    for (double & v : out.data) v = std::tanh(v);
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, id](Graph & g) {
        if (!g.requires_grad(x)) return;
        const auto & go = g.grad(id).data;
        const auto & yv = g.value(id).data;
        double * gi = g.grad_data(x);
        for (size_t i = 0; i < go.size(); i++) {
            gi[i] += go[i] * (1.0 - yv[i] * yv[i]);
        }
    });
}

VarId Graph::clamp_log(VarId x, double floor_val) {
    Tensor out = nodes_[x].value;
    for (double & v : out.data) v = std::log(std::max(v, floor_val));
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, floor_val, id](Graph & g) {
        if (!g.requires_grad(x)) return;
        const auto & go = g.grad(id).data;
        const auto & xv = g.value(x).data;
        double * gi = g.grad_data(x);
        for (size_t i = 0; i < go.size(); i++) {
            if (xv[i] > floor_val) gi[i] += go[i] / xv[i];
        }
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

VarId Graph::bias_add(VarId x, VarId v) {
    const Tensor & xv = nodes_[x].value;
    const Tensor & vv = nodes_[v].value;
    check(xv.rank() == 3 && vv.numel() == xv.dim(1), "bias_add: shapes");
    Tensor out = xv;
    const int64_t N = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
    for (int64_t n = 0; n < N; n++) {
        for (int64_t c = 0; c < C; c++) {
            double * row = out.data.data() + (n * C + c) * T;
            const double b = vv.data[c];
            for (int64_t t = 0; t < T; t++) row[t] += b;
        }
    }
    const bool rg = requires_grad(x) || requires_grad(v);
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), rg, [x, v, id, N, C, T](Graph & g) {
        const auto & go = g.grad(id).data;
        if (g.requires_grad(x)) {
            double * gi = g.grad_data(x);
            for (size_t i = 0; i < go.size(); i++) gi[i] += go[i];
        }
        if (g.requires_grad(v)) {
            double * gv = g.grad_data(v);
            for (int64_t n = 0; n < N; n++) {
                for (int64_t c = 0; c < C; c++) {
                    const double * row = go.data() + (n * C + c) * T;
                    double acc = 0.0;
                    for (int64_t t = 0; t < T; t++) acc += row[t];
                    gv[c] += acc;
                }
            }
        }
    });
}

VarId Graph::rows_linear(VarId x, VarId w) {
    const Tensor & xv = nodes_[x].value;
    const Tensor & wv = nodes_[w].value;
    check(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(1), "rows_linear: shapes");
    const int64_t R = xv.dim(0), C = xv.dim(1), O = wv.dim(0);
    Tensor out({R, O});
    for (int64_t r = 0; r < R; r++) {
        const double * xr = xv.data.data() + r * C;
        double * yr = out.data.data() + r * O;
        for (int64_t o = 0; o < O; o++) {
            const double * wr = wv.data.data() + o * C;
            double acc = 0.0;
            for (int64_t c = 0; c < C; c++) acc += wr[c] * xr[c];
            yr[o] = acc;
        }
    }
    const bool rg = requires_grad(x) || requires_grad(w);
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), rg, [x, w, id, R, C, O](Graph & g) {
        const auto & go = g.grad(id).data;
        const auto & xv = g.value(x).data;
        const auto & wv = g.value(w).data;
        if (g.requires_grad(x)) {
            double * gx = g.grad_data(x);
            for (int64_t r = 0; r < R; r++) {
                for (int64_t o = 0; o < O; o++) {
                    const double gg = go[r * O + o];
                    if (gg == 0.0) continue;
                    const double * wr = wv.data() + o * C;
                    double * gxr = gx + r * C;
                    for (int64_t c = 0; c < C; c++) gxr[c] += gg * wr[c];
                }
            }
        }
        if (g.requires_grad(w)) {
            double * gw = g.grad_data(w);
            for (int64_t r = 0; r < R; r++) {
                const double * xr = xv.data() + r * C;
                for (int64_t o = 0; o < O; o++) {
                    const double gg = go[r * O + o];
                    if (gg == 0.0) continue;
                    double * gwr = gw + o * C;
                    for (int64_t c = 0; c < C; c++) gwr[c] += gg * xr[c];
                }
            }
        }
    });
}

VarId Graph::linear1x1(VarId x, VarId w, VarId b) {
    const Tensor & xv = nodes_[x].value;
    const Tensor & wv = nodes_[w].value;
    check(xv.rank() == 3 && wv.rank() == 2 && wv.dim(1) == xv.dim(1), "linear1x1: shapes");
    const int64_t N = xv.dim(0), Ci = xv.dim(1), T = xv.dim(2), Co = wv.dim(0);
    Tensor out({N, Co, T});
    for (int64_t n = 0; n < N; n++) {
        for (int64_t o = 0; o < Co; o++) {
            double * yr = out.data.data() + (n * Co + o) * T;
            const double * wr = wv.data.data() + o * Ci;
            for (int64_t c = 0; c < Ci; c++) {
                const double wvv = wr[c];
                const double * xr = xv.data.data() + (n * Ci + c) * T;
                for (int64_t t = 0; t < T; t++) yr[t] += wvv * xr[t];
            }
        }
    }
    bool rg = requires_grad(x) || requires_grad(w);
    const VarId id = (VarId) nodes_.size();
    VarId lin = push(std::move(out), rg, [x, w, id, N, Ci, Co, T](Graph & g) {
        const auto & go = g.grad(id).data;
        const auto & xv = g.value(x).data;
        const auto & wv = g.value(w).data;
        if (g.requires_grad(x)) {
            double * gx = g.grad_data(x);
            for (int64_t n = 0; n < N; n++) {
                for (int64_t o = 0; o < Co; o++) {
                    const double * gr = go.data() + (n * Co + o) * T;
                    const double * wr = wv.data() + o * Ci;
                    for (int64_t c = 0; c < Ci; c++) {
                        const double wvv = wr[c];
                        if (wvv == 0.0) continue;
                        double * gxr = gx + (n * Ci + c) * T;
                        for (int64_t t = 0; t < T; t++) gxr[t] += wvv * gr[t];
                    }
                }
            }
        }
        if (g.requires_grad(w)) {
            double * gw = g.grad_data(w);
            for (int64_t n = 0; n < N; n++) {
                for (int64_t o = 0; o < Co; o++) {
                    const double * gr = go.data() + (n * Co + o) * T;
                    double * gwr = gw + o * Ci;
                    for (int64_t c = 0; c < Ci; c++) {
                        const double * xr = xv.data() + (n * Ci + c) * T;
                        double acc = 0.0;
                        for (int64_t t = 0; t < T; t++) acc += gr[t] * xr[t];
                        gwr[c] += acc;
                    }
                }
            }
        }
    });
    if (b >= 0) lin = bias_add(lin, b);
    return lin;
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

VarId Graph::conv1d(VarId x, VarId w, VarId b, int stride, int pad, int dilation) {
    const Tensor & xv = nodes_[x].value;
    const Tensor & wv = nodes_[w].value;
    check(xv.rank() == 3 && wv.rank() == 3 && wv.dim(1) == xv.dim(1), "conv1d: shapes");
    const int64_t N = xv.dim(0), Ci = xv.dim(1), T = xv.dim(2);
    const int64_t Co = wv.dim(0), K = wv.dim(2);
    const int64_t To = conv_out_len(T, (int) K, stride, pad, dilation);
    check(To >= 1, "conv1d: output length < 1");

    Tensor out({N, Co, To});
    for (int64_t n = 0; n < N; n++) {
        for (int64_t o = 0; o < Co; o++) {
            double * yr = out.data.data() + (n * Co + o) * To;
            for (int64_t c = 0; c < Ci; c++) {
                const double * xr = xv.data.data() + (n * Ci + c) * T;
                const double * wr = wv.data.data() + (o * Ci + c) * K;
                for (int64_t k = 0; k < K; k++) {
                    const double wvv = wr[k];
                    if (wvv == 0.0) continue;
                    const int64_t off = k * dilation - pad;
                    for (int64_t to = 0; to < To; to++) {
                        const int64_t ti = to * stride + off;
                        if (ti >= 0 && ti < T) yr[to] += wvv * xr[ti];
                    }
                }
            }
        }
    }

    bool rg = requires_grad(x) || requires_grad(w);
    const VarId id = (VarId) nodes_.size();
    VarId conv = push(std::move(out), rg,
                      [x, w, id, N, Ci, Co, T, To, K, stride, pad, dilation](Graph & g) {
        const auto & go = g.grad(id).data;
        const auto & xv = g.value(x).data;
        const auto & wv = g.value(w).data;
        const bool gx_on = g.requires_grad(x);
        const bool gw_on = g.requires_grad(w);
        double * gx = gx_on ? g.grad_data(x) : nullptr;
        double * gw = gw_on ? g.grad_data(w) : nullptr;
        for (int64_t n = 0; n < N; n++) {
            for (int64_t o = 0; o < Co; o++) {
                const double * gr = go.data() + (n * Co + o) * To;
                for (int64_t c = 0; c < Ci; c++) {
                    const double * xr = xv.data() + (n * Ci + c) * T;
                    const double * wr = wv.data() + (o * Ci + c) * K;
                    double * gxr = gx_on ? gx + (n * Ci + c) * T : nullptr;
                    double * gwr = gw_on ? gw + (o * Ci + c) * K : nullptr;
                    for (int64_t k = 0; k < K; k++) {
                        const int64_t off = k * dilation - pad;
                        double wacc = 0.0;
                        const double wvv = wr[k];
                        for (int64_t to = 0; to < To; to++) {
                            const int64_t ti = to * stride + off;
                            if (ti < 0 || ti >= T) continue;
                            const double gg = gr[to];
                            if (gx_on) gxr[ti] += wvv * gg;
                            if (gw_on) wacc += gg * xr[ti];
                        }
                        if (gw_on) gwr[k] += wacc;
                    }
                }
            }
        }
    });
    if (b >= 0) conv = bias_add(conv, b);
    return conv;
}

VarId Graph::conv_transpose1d(VarId x, VarId w, VarId b, int stride, int pad) {
    const Tensor & xv = nodes_[x].value;
    const Tensor & wv = nodes_[w].value;
    check(xv.rank() == 3 && wv.rank() == 3 && wv.dim(0) == xv.dim(1), "conv_transpose1d: shapes");
    const int64_t N = xv.dim(0), Ci = xv.dim(1), T = xv.dim(2);
    const int64_t Co = wv.dim(1), K = wv.dim(2);
    const int64_t To = (T - 1) * stride - 2 * (int64_t) pad + K;
    check(To >= 1, "conv_transpose1d: output length < 1");

    Tensor out({N, Co, To});
    for (int64_t n = 0; n < N; n++) {
        for (int64_t c = 0; c < Ci; c++) {
            const double * xr = xv.data.data() + (n * Ci + c) * T;
            for (int64_t o = 0; o < Co; o++) {
                double * yr = out.data.data() + (n * Co + o) * To;
                const double * wr = wv.data.data() + (c * Co + o) * K;
                for (int64_t k = 0; k < K; k++) {
                    const double wvv = wr[k];
                    if (wvv == 0.0) continue;
                    const int64_t off = k - pad;
                    for (int64_t t = 0; t < T; t++) {
                        const int64_t to = t * stride + off;
                        if (to >= 0 && to < To) yr[to] += wvv * xr[t];
                    }
                }
            }
        }
    }

    bool rg = requires_grad(x) || requires_grad(w);
    const VarId id = (VarId) nodes_.size();
    VarId conv = push(std::move(out), rg,
                      [x, w, id, N, Ci, Co, T, To, K, stride, pad](Graph & g) {
        const auto & go = g.grad(id).data;
        const auto & xv = g.value(x).data;
        const auto & wv = g.value(w).data;
        const bool gx_on = g.requires_grad(x);
        const bool gw_on = g.requires_grad(w);
        double * gx = gx_on ? g.grad_data(x) : nullptr;
        double * gw = gw_on ? g.grad_data(w) : nullptr;
        for (int64_t n = 0; n < N; n++) {
            for (int64_t c = 0; c < Ci; c++) {
                const double * xr = xv.data() + (n * Ci + c) * T;
                double * gxr = gx_on ? gx + (n * Ci + c) * T : nullptr;
                for (int64_t o = 0; o < Co; o++) {
                    const double * gr = go.data() + (n * Co + o) * To;
                    const double * wr = wv.data() + (c * Co + o) * K;
                    double * gwr = gw_on ? gw + (c * Co + o) * K : nullptr;
                    for (int64_t k = 0; k < K; k++) {
                        const int64_t off = k - pad;
                        const double wvv = wr[k];
                        double wacc = 0.0;
                        for (int64_t t = 0; t < T; t++) {
                            const int64_t to = t * stride + off;
                            if (to < 0 || to >= To) continue;
                            const double gg = gr[to];
                            if (gx_on) gxr[t] += wvv * gg;
                            if (gw_on) wacc += gg * xr[t];
                        }
                        if (gw_on) gwr[k] += wacc;
                    }
                }
            }
        }
    });
    if (b >= 0) conv = bias_add(conv, b);
    return conv;
}

VarId Graph::avg_pool1d(VarId x, int k, int stride, int pad) {
    const Tensor & xv = nodes_[x].value;
    check(xv.rank() == 3, "avg_pool1d: rank");
    const int64_t N = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
    const int64_t To = (T + 2 * (int64_t) pad - k) / stride + 1;
    check(To >= 1, "avg_pool1d: output length < 1");
    const double inv = 1.0 / k;

    Tensor out({N, C, To});
    for (int64_t nc = 0; nc < N * C; nc++) {
        const double * xr = xv.data.data() + nc * T;
        double * yr = out.data.data() + nc * To;
        for (int64_t to = 0; to < To; to++) {
            double acc = 0.0;
            for (int64_t i = 0; i < k; i++) {
                const int64_t ti = to * stride + i - pad;
                if (ti >= 0 && ti < T) acc += xr[ti];
            }
            yr[to] = acc * inv;
        }
    }
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, id, N, C, T, To, k, stride, pad, inv](Graph & g) {
        if (!g.requires_grad(x)) return;
        const auto & go = g.grad(id).data;
        double * gx = g.grad_data(x);
        for (int64_t nc = 0; nc < N * C; nc++) {
            const double * gr = go.data() + nc * To;
            double * gxr = gx + nc * T;
            for (int64_t to = 0; to < To; to++) {
                const double gg = gr[to] * inv;
                if (gg == 0.0) continue;
                for (int64_t i = 0; i < k; i++) {
                    const int64_t ti = to * stride + i - pad;
                    if (ti >= 0 && ti < T) gxr[ti] += gg;
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// reshaping
// ---------------------------------------------------------------------------

VarId Graph::concat_channels(VarId a, VarId b) {
    const Tensor & av = nodes_[a].value;
    const Tensor & bv = nodes_[b].value;
    check(av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0) && av.dim(2) == bv.dim(2),
          "concat_channels: shapes");
    const int64_t N = av.dim(0), C1 = av.dim(1), C2 = bv.dim(1), T = av.dim(2);
    Tensor out({N, C1 + C2, T});
    for (int64_t n = 0; n < N; n++) {
        std::copy_n(av.data.data() + n * C1 * T, C1 * T, out.data.data() + n * (C1 + C2) * T);
        std::copy_n(bv.data.data() + n * C2 * T, C2 * T, out.data.data() + n * (C1 + C2) * T + C1 * T);
    }
    const bool rg = requires_grad(a) || requires_grad(b);
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), rg, [a, b, id, N, C1, C2, T](Graph & g) {
        const auto & go = g.grad(id).data;
        if (g.requires_grad(a)) {
            double * ga = g.grad_data(a);
            for (int64_t n = 0; n < N; n++) {
                const double * src = go.data() + n * (C1 + C2) * T;
                for (int64_t i = 0; i < C1 * T; i++) ga[n * C1 * T + i] += src[i];
            }
        }
        if (g.requires_grad(b)) {
            double * gb = g.grad_data(b);
            for (int64_t n = 0; n < N; n++) {
                const double * src = go.data() + n * (C1 + C2) * T + C1 * T;
                for (int64_t i = 0; i < C2 * T; i++) gb[n * C2 * T + i] += src[i];
            }
        }
    });
}

VarId Graph::slice_time(VarId x, int64_t start, int64_t len) {
    const Tensor & xv = nodes_[x].value;
    check(xv.rank() == 3, "slice_time: rank");
    const int64_t N = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
    check(start >= 0 && start + len <= T, "slice_time: out of range");
    Tensor out({N, C, len});
    for (int64_t nc = 0; nc < N * C; nc++) {
        std::copy_n(xv.data.data() + nc * T + start, len, out.data.data() + nc * len);
    }
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, id, N, C, T, start, len](Graph & g) {
        if (!g.requires_grad(x)) return;
        const auto & go = g.grad(id).data;
        double * gx = g.grad_data(x);
        for (int64_t nc = 0; nc < N * C; nc++) {
            for (int64_t t = 0; t < len; t++) gx[nc * T + start + t] += go[nc * len + t];
        }
    });
}

VarId Graph::phase_split(VarId x, int period) {
    const Tensor & xv = nodes_[x].value;
    check(xv.rank() == 3 && xv.dim(0) == 1 && xv.dim(1) == 1, "phase_split: expects (1,1,L)");
    const int64_t L = xv.dim(2);
    const int64_t R = (L + period - 1) / period;
    Tensor out({period, 1, R});
    for (int64_t j = 0; j < period; j++) {
        for (int64_t r = 0; r < R; r++) {
            const int64_t t = r * period + j;
            out.data[j * R + r] = t < L ? xv.data[t] : 0.0;
        }
    }
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, id, period, L, R](Graph & g) {
        if (!g.requires_grad(x)) return;
        const auto & go = g.grad(id).data;
        double * gx = g.grad_data(x);
        for (int64_t j = 0; j < period; j++) {
            for (int64_t r = 0; r < R; r++) {
                const int64_t t = r * period + j;
                if (t < L) gx[t] += go[j * R + r];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// STFT / mel
// ---------------------------------------------------------------------------

VarId Graph::frame_signal(VarId x, const StftConfig & cfg) {
    const Tensor & xv = nodes_[x].value;
    check(xv.rank() == 3 && xv.dim(0) == 1 && xv.dim(1) == 1, "frame_signal: expects (1,1,L)");
    const int64_t L = xv.dim(2);
    const int64_t T = L / cfg.hop;
    check(T >= 1, "frame_signal: too short");
    const std::vector<double> window = hann_window(cfg.win);

    Tensor out({T, cfg.win});
    for (int64_t t = 0; t < T; t++) {
        const int64_t start = frame_start((int) t, cfg);
        double * row = out.data.data() + t * cfg.win;
        for (int i = 0; i < cfg.win; i++) {
            row[i] = xv.data[reflect_index(start + i, L)] * window[i];
        }
    }
    const VarId id = (VarId) nodes_.size();
    const int win = cfg.win, hop = cfg.hop;
    return push(std::move(out), requires_grad(x), [x, id, L, T, win, hop, window](Graph & g) {
        if (!g.requires_grad(x)) return;
        const auto & go = g.grad(id).data;
        double * gx = g.grad_data(x);
        StftConfig cfg2;
        cfg2.win = win;
        cfg2.hop = hop;
        for (int64_t t = 0; t < T; t++) {
            const int64_t start = frame_start((int) t, cfg2);
            const double * row = go.data() + t * win;
            for (int i = 0; i < win; i++) {
                gx[reflect_index(start + i, L)] += row[i] * window[i];
            }
        }
    });
}

VarId Graph::stft_mag(VarId frames, int fft) {
    const Tensor & fv = nodes_[frames].value;
    check(fv.rank() == 2 && fv.dim(1) <= fft, "stft_mag: shapes");
    const int64_t T = fv.dim(0), win = fv.dim(1);
    const int64_t nb = fft / 2 + 1;

    Tensor out({T, nb});
    std::vector<double> spectra((size_t) T * 2 * nb);  // saved for backward
    std::vector<double> padded(fft, 0.0);
    for (int64_t t = 0; t < T; t++) {
        std::fill(padded.begin(), padded.end(), 0.0);
        std::copy_n(fv.data.data() + t * win, win, padded.data());
        double * spec = spectra.data() + t * 2 * nb;
        rfft(padded.data(), spec, fft);
        double * row = out.data.data() + t * nb;
        for (int64_t k = 0; k < nb; k++) {
            row[k] = std::sqrt(spec[2 * k] * spec[2 * k] + spec[2 * k + 1] * spec[2 * k + 1]);
        }
    }
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(frames),
                [frames, id, T, win, nb, fft, spectra = std::move(spectra)](Graph & g) {
        if (!g.requires_grad(frames)) return;
        const auto & go = g.grad(id).data;
        const auto & mag = g.value(id).data;
        double * gf = g.grad_data(frames);
        std::vector<double> gspec(2 * nb);
        std::vector<double> gframe(fft);
        for (int64_t t = 0; t < T; t++) {
            const double * spec = spectra.data() + t * 2 * nb;
            for (int64_t k = 0; k < nb; k++) {
                const double m = mag[t * nb + k];
                const double gg = m > 1e-30 ? go[t * nb + k] / m : 0.0;
                gspec[2 * k]     = gg * spec[2 * k];
                gspec[2 * k + 1] = gg * spec[2 * k + 1];
            }
            rfft_adjoint(gspec.data(), gframe.data(), fft);
            for (int64_t i = 0; i < win; i++) gf[t * win + i] += gframe[i];
        }
    });
}

VarId Graph::log_mel(VarId wav, const StftConfig & cfg, int sample_rate) {
    cfg.validate();
    const int nb = cfg.fft / 2 + 1;
    VarId frames = frame_signal(wav, cfg);
    VarId mag    = stft_mag(frames, cfg.fft);
    Tensor fb({cfg.n_mels, nb}, mel_filterbank(cfg, sample_rate));
    VarId mel = rows_linear(mag, constant(std::move(fb)));  // (T, n_mels)
    return clamp_log(mel, MEL_LOG_FLOOR);
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

VarId Graph::mean_all(VarId x) {
    const Tensor & xv = nodes_[x].value;
    const int64_t n = xv.numel();
    double acc = 0.0;
    for (double v : xv.data) acc += v;
    Tensor out({1});
    out.data[0] = acc / n;
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, id, n](Graph & g) {
        if (!g.requires_grad(x)) return;
        const double gg = g.grad(id).data[0] / n;
        double * gx = g.grad_data(x);
        for (int64_t i = 0; i < n; i++) gx[i] += gg;
    });
}

VarId Graph::l1_mean(VarId a, VarId b) {
    const Tensor & av = nodes_[a].value;
    const Tensor & bv = nodes_[b].value;
    check(av.shape == bv.shape, "l1_mean: shape mismatch");
    const int64_t n = av.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; i++) acc += std::fabs(av.data[i] - bv.data[i]);
    Tensor out({1});
    out.data[0] = acc / n;
    const bool rg = requires_grad(a) || requires_grad(b);
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), rg, [a, b, id, n](Graph & g) {
        const double gg = g.grad(id).data[0] / n;
        const auto & av = g.value(a).data;
        const auto & bv = g.value(b).data;
        const bool ga_on = g.requires_grad(a);
        const bool gb_on = g.requires_grad(b);
        double * ga = ga_on ? g.grad_data(a) : nullptr;
        double * gb = gb_on ? g.grad_data(b) : nullptr;
        for (int64_t i = 0; i < n; i++) {
            const double d = av[i] - bv[i];
            const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            if (ga_on) ga[i] += gg * s;
            if (gb_on) gb[i] -= gg * s;
        }
    });
}

VarId Graph::mse_to_const(VarId x, double c) {
    const Tensor & xv = nodes_[x].value;
    const int64_t n = xv.numel();
    double acc = 0.0;
    for (double v : xv.data) {
        const double d = v - c;
        acc += d * d;
    }
    Tensor out({1});
    out.data[0] = acc / n;
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), requires_grad(x), [x, id, n, c](Graph & g) {
        if (!g.requires_grad(x)) return;
        const double gg = 2.0 * g.grad(id).data[0] / n;
        const auto & xv = g.value(x).data;
        double * gx = g.grad_data(x);
        for (int64_t i = 0; i < n; i++) gx[i] += gg * (xv[i] - c);
    });
}

VarId Graph::weighted_sum(const std::vector<VarId> & xs, const std::vector<double> & coefs) {
    check(xs.size() == coefs.size() && !xs.empty(), "weighted_sum: size mismatch");
    double acc = 0.0;
    bool rg = false;
    for (size_t i = 0; i < xs.size(); i++) {
        check(nodes_[xs[i]].value.numel() == 1, "weighted_sum: non-scalar term");
        acc += coefs[i] * nodes_[xs[i]].value.data[0];
        rg = rg || requires_grad(xs[i]);
    }
    Tensor out({1});
    out.data[0] = acc;
    const VarId id = (VarId) nodes_.size();
    return push(std::move(out), rg, [xs, coefs, id](Graph & g) {
        const double gg = g.grad(id).data[0];
        for (size_t i = 0; i < xs.size(); i++) {
            if (g.requires_grad(xs[i])) g.grad_data(xs[i])[0] += gg * coefs[i];
        }
    });
}

} // namespace skqvc::ad
