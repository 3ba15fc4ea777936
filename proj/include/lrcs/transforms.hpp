#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrcs/types.hpp"

namespace lrcs::transforms {

/// Symlet-4 analysis low-pass filter (orthonormal, 4 vanishing moments).
extern const std::array<double, 8> kSym4Lowpass;

struct WaveletSpec {
  std::string family = "symlet-4";
  int levels = 4;
  std::string boundary = "periodic";
  Dims3 dims;
  std::array<int, 3> axis_levels{0, 0, 0};  // effective levels along x, y, z

  /// Clips requested levels per axis to how often the extent halves evenly.
  static WaveletSpec make(const Dims3& dims, int levels = 4);
};

/// Separable orthonormal 3-D discrete wavelet transform with periodic extension.
/// Coefficients keep the volume's layout: each level writes approximation then
/// detail halves along every axis still being decomposed.
class Wavelet3D {
 public:
  explicit Wavelet3D(WaveletSpec spec);

  const WaveletSpec& spec() const { return spec_; }

  void forward(std::span<const cplx> volume, std::span<cplx> coeffs) const;
  void adjoint(std::span<const cplx> coeffs, std::span<cplx> volume) const;

  /// Column-wise application to an M x N matrix.
  CMatrix forward(const CMatrix& x) const;
  CMatrix adjoint(const CMatrix& w) const;

  /// Mask (per coefficient index) of the coarsest approximation band.
  std::vector<std::uint8_t> approximation_band() const;

 private:
  WaveletSpec spec_;
};

/// Sum over rows of the row 2-norm: one group per coefficient location.
double group_l12_norm(const CMatrix& w);

/// Row-wise shrinkage of the l2 norm by alpha; rows with norm <= alpha become zero.
CMatrix group_shrink(const CMatrix& z, double alpha);

/// Scalar soft threshold.
double soft_threshold(double x, double alpha);

}  // namespace lrcs::transforms
