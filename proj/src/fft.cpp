#include "skqvc/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>

namespace skqvc {

namespace {

struct PlanPair {
    int          n    = 0;
    double *     real = nullptr; // n
    fftw_complex * cpx = nullptr; // n/2+1
    fftw_plan    fwd{};
    fftw_plan    bwd{};
};

std::mutex g_mutex;

PlanPair & get_plans(int n) {
    static std::map<int, PlanPair> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    PlanPair p;
    p.n    = n;
    p.real = fftw_alloc_real(n);
    p.cpx  = fftw_alloc_complex(n / 2 + 1);
    p.fwd  = fftw_plan_dft_r2c_1d(n, p.real, p.cpx, FFTW_ESTIMATE);
    p.bwd  = fftw_plan_dft_c2r_1d(n, p.cpx, p.real, FFTW_ESTIMATE);
    return cache.emplace(n, p).first->second;
}

} // namespace

void rfft(const double * in, double * out_interleaved, int n) {
    std::lock_guard<std::mutex> lock(g_mutex);
    PlanPair & p = get_plans(n);
    std::memcpy(p.real, in, sizeof(double) * n);
    fftw_execute(p.fwd);
    std::memcpy(out_interleaved, p.cpx, sizeof(double) * 2 * (n / 2 + 1));
}

void rfft_adjoint(const double * grad_interleaved, double * grad_in, int n) {
    std::lock_guard<std::mutex> lock(g_mutex);
    PlanPair & p = get_plans(n);
    const int nb = n / 2 + 1;
    // c2r assumes a Hermitian extension, which doubles interior bins; halve
    // them so the result is the exact transpose of rfft. Imaginary parts of
    // the DC/Nyquist bins have zero adjoint (those outputs are identically 0).
    for (int k = 0; k < nb; k++) {
        const bool edge = (k == 0) || (2 * k == n);
        const double scale = edge ? 1.0 : 0.5;
        p.cpx[k][0] = grad_interleaved[2 * k + 0] * scale;
        p.cpx[k][1] = edge ? 0.0 : grad_interleaved[2 * k + 1] * scale;
    }
    fftw_execute(p.bwd);
    std::memcpy(grad_in, p.real, sizeof(double) * n);
}

} // namespace skqvc
