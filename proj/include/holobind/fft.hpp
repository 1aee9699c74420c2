#pragma once

#include <complex>
#include <span>
#include <vector>

#include "holobind/tensor.hpp"

namespace holobind {

using Complex = std::complex<double>;

/// Complex coefficients laid out exactly like the source tensor.
struct Spectrum {
  Dims dims;
  std::vector<Complex> values;
};

/// In-place 1D DFT of any length: iterative radix-2 for powers of two,
/// Bluestein's chirp-z otherwise. Unnormalized in both directions; the
/// inverse uses exp(+2 pi i jk/n) and the caller applies 1/n.
void dft_inplace(std::span<Complex> data, bool inverse);

/// Forward 2D transform of an H x W tensor (unnormalized).
Spectrum fft2(const Tensor& t);
/// Inverse 2D transform with the 1/(H W) factor. The imaginary residue must
/// satisfy max|im| <= 1e-8 max|re|, else ConjugateSymmetryError.
Tensor ifft2(const Spectrum& s);

/// Transform over the spatial axes of a tensor: rank 1 is a 1D transform,
/// rank 2 a 2D transform, rank 3 (H x W x D) an independent 2D transform
/// per channel.
Spectrum spatial_fft(const Tensor& t);
Tensor spatial_ifft(const Spectrum& s);

}  // namespace holobind
