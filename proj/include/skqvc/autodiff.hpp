#pragma once

#include "skqvc/mel.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace skqvc::ad {

struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double>  data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign((size_t) numel_of(shape), 0.0);
    }
    Tensor(std::vector<int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    static int64_t numel_of(const std::vector<int64_t> & s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }
    int64_t numel() const { return (int64_t) data.size(); }
    int64_t dim(int i) const { return shape[i]; }
    int rank() const { return (int) shape.size(); }
};

using VarId = int32_t;

// Reverse-mode tape. Build a graph per step, call backward on a scalar, read
// gradients of the leaves. Double precision throughout.
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    VarId leaf(Tensor value, bool requires_grad = false);
    VarId constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor & value(VarId id) const { return nodes_[id].value; }
    const Tensor & grad(VarId id) const;
    bool has_grad(VarId id) const { return !nodes_[id].grad.data.empty(); }
    double scalar(VarId id) const { return nodes_[id].value.data[0]; }

    // elementwise
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId scale(VarId a, double s);
    VarId leaky_relu(VarId x, double slope);
    VarId tanh_act(VarId x);
    VarId clamp_log(VarId x, double floor_val);

    // x: (N, C, T) plus v: (C), broadcast over batch and time (bias / speaker add)
    VarId bias_add(VarId x, VarId v);

    // x: (R, C) rows, w: (O, C) -> (R, O)
    VarId rows_linear(VarId x, VarId w);

    // per-frame affine: x (N, Cin, T), w (Cout, Cin), b (Cout) or -1 -> (N, Cout, T)
    VarId linear1x1(VarId x, VarId w, VarId b);

    // x (N, Cin, T), w (Cout, Cin, k) -> (N, Cout, To); zero padding
    VarId conv1d(VarId x, VarId w, VarId b, int stride, int pad, int dilation = 1);

    // x (N, Cin, T), w (Cin, Cout, k) -> (N, Cout, (T-1)*stride - 2*pad + k)
    VarId conv_transpose1d(VarId x, VarId w, VarId b, int stride, int pad);

    VarId avg_pool1d(VarId x, int k, int stride, int pad);

    // concat along the channel axis: (N,C1,T) + (N,C2,T) -> (N,C1+C2,T)
    VarId concat_channels(VarId a, VarId b);

    VarId slice_time(VarId x, int64_t start, int64_t len);

    // (1, 1, L) -> (period, 1, ceil(L/period)), zero padded; phases as batch
    VarId phase_split(VarId x, int period);

    // (1, 1, L) -> (T, win) windowed frames with reflect padding, T = L/hop
    VarId frame_signal(VarId x, const StftConfig & cfg);

    // (T, win) -> (T, fft/2+1) DFT magnitudes (rows zero padded to fft)
    VarId stft_mag(VarId frames, int fft);

    // scalar reductions
    VarId mean_all(VarId x);
    VarId l1_mean(VarId a, VarId b);              // mean |a - b|
    VarId mse_to_const(VarId x, double c);        // mean (x - c)^2
    VarId weighted_sum(const std::vector<VarId> & xs, const std::vector<double> & coefs);

    // full differentiable log-mel of a waveform var (1, 1, L)
    VarId log_mel(VarId wav, const StftConfig & cfg, int sample_rate = SAMPLE_RATE);

    void backward(VarId loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;      // empty until touched
        std::function<void(Graph &)> back;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;

    VarId push(Tensor value, bool requires_grad, std::function<void(Graph &)> back);
    Tensor & grad_buf(VarId id);
    friend struct GradAccess;

public:
    // accumulation buffer for op implementations
    double * grad_data(VarId id) { return grad_buf(id).data.data(); }
    Tensor & grad_mutable(VarId id) { return grad_buf(id); }
    bool requires_grad(VarId id) const { return nodes_[id].requires_grad; }
    bool grad_enabled() const { return grad_enabled_; }
};

} // namespace skqvc::ad
