#include <cmath>
#include <vector>

#include "lrcs/threading.hpp"
#include "lrcs/transforms.hpp"

namespace lrcs::transforms {

const std::array<double, 8> kSym4Lowpass = {
    -0.07576571478950314547, -0.02963552764600183414, 0.49761866763277567405, 0.80373875180513184383,
    0.29785779560530537062,  -0.09921954357663354968, -0.01260396726203092726, 0.03222310060405161686,
};

namespace {

std::array<double, 8> highpass() {
  std::array<double, 8> g{};
  for (std::size_t k = 0; k < 8; ++k) g[k] = ((k % 2) ? -1.0 : 1.0) * kSym4Lowpass[7 - k];
  return g;
}

const std::array<double, 8> kSym4Highpass = highpass();

// One analysis step on a strided line of even length n.
void analyze_line(cplx* base, std::size_t stride, std::size_t n, std::vector<cplx>& in, std::vector<cplx>& out) {
  in.resize(n);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = base[i * stride];
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    cplx a = 0.0, d = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
      const cplx v = in[(2 * i + k) % n];
      a += kSym4Lowpass[k] * v;
      d += kSym4Highpass[k] * v;
    }
    out[i] = a;
    out[half + i] = d;
  }
  for (std::size_t i = 0; i < n; ++i) base[i * stride] = out[i];
}

// Transpose of analyze_line.
void synthesize_line(cplx* base, std::size_t stride, std::size_t n, std::vector<cplx>& in, std::vector<cplx>& out) {
  in.resize(n);
  out.assign(n, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) in[i] = base[i * stride];
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t k = 0; k < 8; ++k) out[(2 * i + k) % n] += kSym4Lowpass[k] * in[i] + kSym4Highpass[k] * in[half + i];
  for (std::size_t i = 0; i < n; ++i) base[i * stride] = out[i];
}

struct Extent {
  std::size_t e[3];
};

// Apply a line operation along `axis` over the sub-box [0,ext) of a volume.
template <typename Op>
void along_axis(cplx* vol, const Dims3& d, const Extent& ext, int axis, Op op) {
  const std::size_t strides[3] = {1, d.nx, d.nx * d.ny};
  const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  std::vector<cplx> in, out;
  for (std::size_t i2 = 0; i2 < ext.e[a2]; ++i2)
    for (std::size_t i1 = 0; i1 < ext.e[a1]; ++i1) op(vol + i1 * strides[a1] + i2 * strides[a2], strides[axis], ext.e[axis], in, out);
}

}  // namespace

WaveletSpec WaveletSpec::make(const Dims3& dims, int levels) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) throw ValidationError("wavelet: zero-sized axis");
  WaveletSpec s;
  s.levels = levels;
  s.dims = dims;
  const std::size_t extents[3] = {dims.nx, dims.ny, dims.nz};
  for (int a = 0; a < 3; ++a) {
    int l = 0;
    std::size_t e = extents[a];
    while (l < levels && e % 2 == 0 && e >= 2) {
      e /= 2;
      ++l;
    }
    s.axis_levels[a] = l;
  }
  return s;
}

Wavelet3D::Wavelet3D(WaveletSpec spec) : spec_(std::move(spec)) {}

void Wavelet3D::forward(std::span<const cplx> volume, std::span<cplx> coeffs) const {
  const auto& d = spec_.dims;
  if (volume.size() != d.voxels() || coeffs.size() != d.voxels()) throw ValidationError("wavelet: volume size mismatch");
  std::copy(volume.begin(), volume.end(), coeffs.begin());
  Extent ext{{d.nx, d.ny, d.nz}};
  for (int level = 0; level < spec_.levels; ++level)
    for (int axis = 0; axis < 3; ++axis) {
      if (level >= spec_.axis_levels[axis]) continue;
      along_axis(coeffs.data(), d, ext, axis, analyze_line);
      ext.e[axis] /= 2;
    }
}

void Wavelet3D::adjoint(std::span<const cplx> coeffs, std::span<cplx> volume) const {
  const auto& d = spec_.dims;
  if (volume.size() != d.voxels() || coeffs.size() != d.voxels()) throw ValidationError("wavelet: volume size mismatch");
  std::copy(coeffs.begin(), coeffs.end(), volume.begin());
  // Extents of the analysed box at the start of each (level, axis) step.
  std::vector<std::pair<int, Extent>> steps;
  Extent ext{{d.nx, d.ny, d.nz}};
  for (int level = 0; level < spec_.levels; ++level)
    for (int axis = 0; axis < 3; ++axis) {
      if (level >= spec_.axis_levels[axis]) continue;
      steps.emplace_back(axis, ext);
      ext.e[axis] /= 2;
    }
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) along_axis(volume.data(), d, it->second, it->first, synthesize_line);
}

CMatrix Wavelet3D::forward(const CMatrix& x) const {
  CMatrix w(x.rows(), x.cols());
  parallel_for(static_cast<std::size_t>(x.cols()), [&](std::size_t k) {
    const auto kk = static_cast<Eigen::Index>(k);
    forward({x.col(kk).data(), static_cast<std::size_t>(x.rows())}, {w.col(kk).data(), static_cast<std::size_t>(x.rows())});
  });
  return w;
}

CMatrix Wavelet3D::adjoint(const CMatrix& w) const {
  CMatrix x(w.rows(), w.cols());
  parallel_for(static_cast<std::size_t>(w.cols()), [&](std::size_t k) {
    const auto kk = static_cast<Eigen::Index>(k);
    adjoint({w.col(kk).data(), static_cast<std::size_t>(w.rows())}, {x.col(kk).data(), static_cast<std::size_t>(w.rows())});
  });
  return x;
}

std::vector<std::uint8_t> Wavelet3D::approximation_band() const {
  const auto& d = spec_.dims;
  std::size_t ax = d.nx >> spec_.axis_levels[0], ay = d.ny >> spec_.axis_levels[1], az = d.nz >> spec_.axis_levels[2];
  std::vector<std::uint8_t> band(d.voxels(), 0);
  for (std::size_t z = 0; z < az; ++z)
    for (std::size_t y = 0; y < ay; ++y)
      for (std::size_t x = 0; x < ax; ++x) band[d.index(x, y, z)] = 1;
  return band;
}

double group_l12_norm(const CMatrix& w) { return w.rowwise().norm().sum(); }

double soft_threshold(double x, double alpha) {
  if (x > alpha) return x - alpha;
  if (x < -alpha) return x + alpha;
  return 0.0;
}

CMatrix group_shrink(const CMatrix& z, double alpha) {
  if (alpha < 0.0) throw ValidationError("group_shrink: negative threshold");
  CMatrix g(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    const double norm = z.row(j).norm();
    if (norm <= alpha || norm == 0.0)
      g.row(j).setZero();
    else
      g.row(j) = z.row(j) * (soft_threshold(norm, alpha) / norm);
  }
  return g;
}

}  // namespace lrcs::transforms
