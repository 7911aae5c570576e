#pragma once

#include <vector>

namespace skqvc {

// Real-to-complex DFT of length n. Output: n/2+1 (re, im) pairs, interleaved.
// Backed by FFTW with a process-wide plan cache; thread-safe to execute.
void rfft(const double * in, double * out_interleaved, int n);

// Adjoint of rfft (transpose of the real linear map R^n -> R^{2*(n/2+1)}).
// Used by the differentiable mel path; verified against finite differences.
void rfft_adjoint(const double * grad_interleaved, double * grad_in, int n);

} // namespace skqvc
