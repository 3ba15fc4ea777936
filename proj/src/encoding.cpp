#include "lrcs/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>

#include <fftw3.h>

#include "lrcs/threading.hpp"

namespace lrcs::encoding {

namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
class PlanCache {
 public:
  static const PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  std::pair<fftw_plan, fftw_plan> get(std::size_t ny, std::size_t nx) const {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(ny, nx);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<fftw_complex> scratch(ny * nx);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan fwd = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), scratch.data(), scratch.data(),
                                     FFTW_FORWARD, flags);
    fftw_plan bwd = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), scratch.data(), scratch.data(),
                                     FFTW_BACKWARD, flags);
    plans_.emplace(key, std::make_pair(fwd, bwd));
    return {fwd, bwd};
  }

 private:
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::size_t, std::size_t>, std::pair<fftw_plan, fftw_plan>> plans_;
};

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

// Unnormalized in-place 2-D transform of every slice in a volume.
void fft_slices(cplx* volume, const Dims3& dims, bool forward) {
  auto [fwd, bwd] = PlanCache::instance().get(dims.ny, dims.nx);
  for (std::size_t z = 0; z < dims.nz; ++z) {
    auto* slice = as_fftw(volume + z * dims.slice_size());
    fftw_execute_dft(forward ? fwd : bwd, slice, slice);
  }
}

// Centred line index l <-> FFT row index m.
std::size_t fft_row(std::size_t line, std::size_t n) { return (line + n - n / 2) % n; }

std::vector<std::size_t> block_offsets(const SamplingMask& mask, std::size_t nx, std::size_t coils) {
  std::vector<std::size_t> offsets(mask.columns() * mask.nz() + 1, 0);
  for (std::size_t k = 0; k < mask.columns(); ++k)
    for (std::size_t z = 0; z < mask.nz(); ++z) {
      const std::size_t i = z + mask.nz() * k;
      offsets[i + 1] = offsets[i] + mask.lines_kept(z, k) * nx * coils;
    }
  return offsets;
}

std::vector<std::size_t> kept_lines(const SamplingMask& mask, std::size_t z, std::size_t k) {
  std::vector<std::size_t> lines;
  for (std::size_t l = 0; l < mask.n_pe(); ++l)
    if (mask.kept(l, z, k)) lines.push_back(l);
  return lines;
}

std::mt19937_64 column_rng(std::uint64_t seed, std::size_t z, std::size_t k, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(z), static_cast<std::uint32_t>(k), stream};
  return std::mt19937_64(seq);
}

std::size_t lines_for(std::size_t n_pe, double r) {
  if (!(r >= 1.0)) throw ValidationError("acceleration factor R must be >= 1");
  if (n_pe < 8) throw ValidationError("n_pe must be at least 8");
  const auto count = static_cast<std::size_t>(std::ceil(static_cast<double>(n_pe) / r - 1e-12));
  if (count < 4) throw ValidationError("cannot honor center lines: ceil(n_pe/R) < 4");
  return count;
}

}  // namespace

MaskScheme parse_scheme(const std::string& name) {
  if (name == "proposed") return MaskScheme::Proposed;
  if (name == "lowres-lattice") return MaskScheme::LowResLattice;
  throw ValidationError("unknown sampling scheme '" + name + "'");
}

std::string scheme_name(MaskScheme s) { return s == MaskScheme::Proposed ? "proposed" : "lowres-lattice"; }

SamplingMask make_sampling_mask(std::size_t n_pe, std::size_t nz, std::span<const ColumnLabel> labels, double r,
                                std::uint64_t seed) {
  const std::size_t count = lines_for(n_pe, r);
  SamplingMask mask(n_pe, nz, labels.size(), r, seed, "proposed");
  const double center = static_cast<double>(n_pe / 2);
  const double sigma = static_cast<double>(n_pe) / 6.0;
  std::vector<double> density(n_pe);
  for (std::size_t l = 0; l < n_pe; ++l) {
    const double t = (static_cast<double>(l) - center) / sigma;
    density[l] = std::exp(-0.5 * t * t);
  }
  std::set<std::vector<std::uint8_t>> seen;
  for (std::size_t k = 0; k < labels.size(); ++k)
    for (std::size_t z = 0; z < nz; ++z) {
      if (labels[k].is_b0() || count >= n_pe) {
        for (std::size_t l = 0; l < n_pe; ++l) mask.set(l, z, k, true);
        continue;
      }
      std::vector<std::uint8_t> lines;
      // a repeated pattern is redrawn from the next stream
      for (std::uint32_t stream = 0; stream < 64; ++stream) {
        lines.assign(n_pe, 0);
        for (std::size_t l = n_pe / 2 - 2; l < n_pe / 2 + 2; ++l) lines[l] = 1;
        std::vector<double> weights(n_pe);
        for (std::size_t l = 0; l < n_pe; ++l) weights[l] = lines[l] ? 0.0 : density[l];
        auto rng = column_rng(seed, z, k, stream);
        for (std::size_t drawn = 4; drawn < count; ++drawn) {
          std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
          const std::size_t l = pick(rng);
          lines[l] = 1;
          weights[l] = 0.0;
        }
        if (count <= 4 || !seen.contains(lines)) break;
      }
      seen.insert(lines);
      for (std::size_t l = 0; l < n_pe; ++l) mask.set(l, z, k, lines[l] != 0);
    }
  return mask;
}

SamplingMask make_lowres_lattice_mask(std::size_t n_pe, std::size_t nz, std::span<const ColumnLabel> labels,
                                      double r, std::uint64_t seed) {
  const std::size_t count = lines_for(n_pe, r);
  SamplingMask mask(n_pe, nz, labels.size(), r, seed, "lowres-lattice");
  const std::size_t block = std::max<std::size_t>(4, count / 2);
  const std::size_t first = n_pe / 2 - block / 2;
  for (std::size_t k = 0; k < labels.size(); ++k)
    for (std::size_t z = 0; z < nz; ++z) {
      if (labels[k].is_b0() || count >= n_pe) {
        for (std::size_t l = 0; l < n_pe; ++l) mask.set(l, z, k, true);
        continue;
      }
      for (std::size_t l = first; l < first + block; ++l) mask.set(l, z, k, true);
      const std::size_t remaining = count - block;
      if (remaining == 0) continue;
      std::vector<std::size_t> outside;
      for (std::size_t l = 0; l < n_pe; ++l)
        if (!mask.kept(l, z, k)) outside.push_back(l);
      const double step = static_cast<double>(outside.size()) / static_cast<double>(remaining);
      auto rng = column_rng(seed, z, k, 1);
      const double offset = std::uniform_real_distribution<double>(0.0, step)(rng);
      for (std::size_t i = 0; i < remaining; ++i) {
        const auto idx = static_cast<std::size_t>(offset + step * static_cast<double>(i));
        mask.set(outside[std::min(idx, outside.size() - 1)], z, k, true);
      }
    }
  return mask;
}

SamplingMask make_mask(MaskScheme scheme, std::size_t n_pe, std::size_t nz, std::span<const ColumnLabel> labels,
                       double r, std::uint64_t seed) {
  return scheme == MaskScheme::Proposed ? make_sampling_mask(n_pe, nz, labels, r, seed)
                                        : make_lowres_lattice_mask(n_pe, nz, labels, r, seed);
}

SamplingMask full_mask(std::size_t n_pe, std::size_t nz, std::size_t columns) {
  SamplingMask mask(n_pe, nz, columns, 1.0, 0, "full");
  std::fill(mask.raw().begin(), mask.raw().end(), std::uint8_t{1});
  return mask;
}

std::size_t common_center_block(const SamplingMask& mask) {
  const std::size_t dc = mask.n_pe() / 2;
  std::size_t below_min = dc, above_min = mask.n_pe() - dc;
  for (std::size_t k = 0; k < mask.columns(); ++k)
    for (std::size_t z = 0; z < mask.nz(); ++z) {
      if (!mask.kept(dc, z, k)) return 0;
      std::size_t below = 0;
      while (below < dc && mask.kept(dc - below - 1, z, k)) ++below;
      std::size_t above = 1;
      while (dc + above < mask.n_pe() && mask.kept(dc + above, z, k)) ++above;
      below_min = std::min(below_min, below);
      above_min = std::min(above_min, above);
    }
  return below_min + above_min;
}

void EncodingModel::validate() const {
  const auto& d = coils.dims;
  if (static_cast<std::size_t>(coils.maps.rows()) != d.voxels()) throw ValidationError("coil maps do not match dims");
  if (mask.n_pe() != d.ny || mask.nz() != d.nz)
    throw ValidationError("sampling mask geometry (" + std::to_string(mask.n_pe()) + " lines, " +
                          std::to_string(mask.nz()) + " slices) does not match image dims");
  if (phase && (static_cast<std::size_t>(phase->rows()) != d.voxels() ||
                static_cast<std::size_t>(phase->cols()) != mask.columns()))
    throw ValidationError("phase map does not match M x N");
}

std::size_t KSpaceData::block_offset(std::size_t k, std::size_t z, std::size_t c) const {
  std::size_t off = 0;
  for (std::size_t kk = 0; kk < mask.columns(); ++kk)
    for (std::size_t zz = 0; zz < mask.nz(); ++zz) {
      if (kk == k && zz == z) return off + c * mask.lines_kept(z, k) * dims.nx;
      off += mask.lines_kept(zz, kk) * dims.nx * coils;
    }
  throw ValidationError("k-space block index out of range");
}

CVector forward(const EncodingModel& model, const CMatrix& x) {
  const auto& d = model.dims();
  const std::size_t m = d.voxels(), nc = model.coils.coils(), n = model.columns();
  if (static_cast<std::size_t>(x.rows()) != m || static_cast<std::size_t>(x.cols()) != n)
    throw ValidationError("forward: image series is not M x N");
  const auto offsets = block_offsets(model.mask, d.nx, nc);
  CVector out(static_cast<Eigen::Index>(offsets.back()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.slice_size()));
  parallel_for(n, [&](std::size_t k) {
    CVector col = x.col(static_cast<Eigen::Index>(k));
    if (model.phase) col = col.cwiseProduct(model.phase->col(static_cast<Eigen::Index>(k)));
    CVector buf(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < nc; ++c) {
      buf = col.cwiseProduct(model.coils.maps.col(static_cast<Eigen::Index>(c)));
      fft_slices(buf.data(), d, true);
      for (std::size_t z = 0; z < d.nz; ++z) {
        const auto lines = kept_lines(model.mask, z, k);
        std::size_t pos = offsets[z + d.nz * k] + c * lines.size() * d.nx;
        for (std::size_t l : lines) {
          const cplx* row = buf.data() + z * d.slice_size() + fft_row(l, d.ny) * d.nx;
          for (std::size_t lx = 0; lx < d.nx; ++lx) out(static_cast<Eigen::Index>(pos++)) = row[fft_row(lx, d.nx)] * scale;
        }
      }
    }
  });
  return out;
}

CMatrix adjoint(const EncodingModel& model, const CVector& data) {
  const auto& d = model.dims();
  const std::size_t m = d.voxels(), nc = model.coils.coils(), n = model.columns();
  const auto offsets = block_offsets(model.mask, d.nx, nc);
  if (static_cast<std::size_t>(data.size()) != offsets.back())
    throw ValidationError("adjoint: k-space layout mismatch (" + std::to_string(data.size()) + " samples, expected " +
                          std::to_string(offsets.back()) + ")");
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.slice_size()));
  parallel_for(n, [&](std::size_t k) {
    CVector buf(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < nc; ++c) {
      buf.setZero();
      for (std::size_t z = 0; z < d.nz; ++z) {
        const auto lines = kept_lines(model.mask, z, k);
        std::size_t pos = offsets[z + d.nz * k] + c * lines.size() * d.nx;
        for (std::size_t l : lines) {
          cplx* row = buf.data() + z * d.slice_size() + fft_row(l, d.ny) * d.nx;
          for (std::size_t lx = 0; lx < d.nx; ++lx) row[fft_row(lx, d.nx)] = data(static_cast<Eigen::Index>(pos++));
        }
      }
      fft_slices(buf.data(), d, false);
      out.col(static_cast<Eigen::Index>(k)) +=
          scale * model.coils.maps.col(static_cast<Eigen::Index>(c)).conjugate().cwiseProduct(buf);
    }
    if (model.phase)
      out.col(static_cast<Eigen::Index>(k)) =
          out.col(static_cast<Eigen::Index>(k)).cwiseProduct(model.phase->col(static_cast<Eigen::Index>(k)).conjugate());
  });
  return out;
}

CMatrix normal(const EncodingModel& model, const CMatrix& x) {
  const auto& d = model.dims();
  const std::size_t m = d.voxels(), nc = model.coils.coils(), n = model.columns();
  if (static_cast<std::size_t>(x.rows()) != m || static_cast<std::size_t>(x.cols()) != n)
    throw ValidationError("normal: image series is not M x N");
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const double scale = 1.0 / static_cast<double>(d.slice_size());
  parallel_for(n, [&](std::size_t k) {
    const auto kk = static_cast<Eigen::Index>(k);
    CVector col = x.col(kk);
    if (model.phase) col = col.cwiseProduct(model.phase->col(kk));
    std::vector<std::uint8_t> row_kept(d.ny * d.nz, 0);
    bool full = true;
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t l = 0; l < d.ny; ++l) {
        row_kept[z * d.ny + fft_row(l, d.ny)] = model.mask.kept(l, z, k) ? 1 : 0;
        full = full && model.mask.kept(l, z, k);
      }
    CVector buf(static_cast<Eigen::Index>(m));
    CVector acc = CVector::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < nc; ++c) {
      const auto map = model.coils.maps.col(static_cast<Eigen::Index>(c));
      buf = col.cwiseProduct(map);
      if (!full) {
        fft_slices(buf.data(), d, true);
        for (std::size_t z = 0; z < d.nz; ++z)
          for (std::size_t row = 0; row < d.ny; ++row)
            if (!row_kept[z * d.ny + row])
              std::fill_n(buf.data() + z * d.slice_size() + row * d.nx, d.nx, cplx{0.0, 0.0});
        fft_slices(buf.data(), d, false);
        buf *= scale;
      }
      acc += map.conjugate().cwiseProduct(buf);
    }
    if (model.phase) acc = acc.cwiseProduct(model.phase->col(kk).conjugate());
    out.col(kk) = acc;
  });
  return out;
}

KSpaceData forward_data(const EncodingModel& model, const CMatrix& x) {
  return {model.dims(), model.coils.coils(), model.mask, forward(model, x)};
}

CMatrix adjoint_data(const EncodingModel& model, const KSpaceData& d) {
  if (d.dims != model.dims() || d.coils != model.coils.coils() || d.mask.raw() != model.mask.raw())
    throw ValidationError("adjoint: k-space layout does not match the encoding model");
  return adjoint(model, d.samples);
}

KSpaceData undersample(const KSpaceData& full, const SamplingMask& mask) {
  if (mask.n_pe() != full.mask.n_pe() || mask.nz() != full.mask.nz() || mask.columns() != full.mask.columns())
    throw ValidationError("undersample: mask geometry does not match data");
  const auto src_offsets = block_offsets(full.mask, full.dims.nx, full.coils);
  const auto dst_offsets = block_offsets(mask, full.dims.nx, full.coils);
  KSpaceData out{full.dims, full.coils, mask, CVector(static_cast<Eigen::Index>(dst_offsets.back()))};
  const std::size_t nx = full.dims.nx;
  for (std::size_t k = 0; k < mask.columns(); ++k)
    for (std::size_t z = 0; z < mask.nz(); ++z) {
      const auto src_lines = kept_lines(full.mask, z, k);
      const auto dst_lines = kept_lines(mask, z, k);
      for (std::size_t c = 0; c < full.coils; ++c) {
        std::size_t dst = dst_offsets[z + mask.nz() * k] + c * dst_lines.size() * nx;
        for (std::size_t l : dst_lines) {
          auto it = std::find(src_lines.begin(), src_lines.end(), l);
          if (it == src_lines.end()) throw ValidationError("undersample: requested line was not acquired");
          const std::size_t src = src_offsets[z + mask.nz() * k] +
                                  (c * src_lines.size() + static_cast<std::size_t>(it - src_lines.begin())) * nx;
          out.samples.segment(static_cast<Eigen::Index>(dst), static_cast<Eigen::Index>(nx)) =
              full.samples.segment(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(nx));
          dst += nx;
        }
      }
    }
  return out;
}

std::vector<CMatrix> coil_images(const KSpaceData& full) {
  if (full.mask.total_kept() != full.mask.raw().size()) throw ValidationError("coil_images requires fully sampled data");
  const auto& d = full.dims;
  const std::size_t m = d.voxels();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.slice_size()));
  std::vector<CMatrix> out(full.mask.columns());
  for (std::size_t k = 0; k < full.mask.columns(); ++k) {
    out[k].resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(full.coils));
    for (std::size_t c = 0; c < full.coils; ++c) {
      CVector buf(static_cast<Eigen::Index>(m));
      for (std::size_t z = 0; z < d.nz; ++z) {
        const std::size_t base = full.block_offset(k, z, c);
        for (std::size_t l = 0; l < d.ny; ++l) {
          cplx* row = buf.data() + z * d.slice_size() + fft_row(l, d.ny) * d.nx;
          for (std::size_t lx = 0; lx < d.nx; ++lx)
            row[fft_row(lx, d.nx)] = full.samples(static_cast<Eigen::Index>(base + l * d.nx + lx));
        }
      }
      fft_slices(buf.data(), d, false);
      out[k].col(static_cast<Eigen::Index>(c)) = buf * scale;
    }
  }
  return out;
}

double noise_sigma(double mean_s0, double snr) {
  if (!(snr > 0.0)) throw ValidationError("snr must be positive");
  return std::isinf(snr) ? 0.0 : mean_s0 / snr;
}

KSpaceData add_noise(const KSpaceData& data, double sigma, std::uint64_t seed) {
  KSpaceData out = data;
  if (!(sigma > 0.0) || std::isinf(sigma)) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Eigen::Index i = 0; i < out.samples.size(); ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    out.samples(i) += cplx(re, im);
  }
  return out;
}

namespace {

// Separable Gaussian low-pass over x and y of one slice, zero padded and
// normalised by the kernel mass that falls inside the image.
void gaussian_lowpass(cplx* slice, std::size_t nx, std::size_t ny, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  std::vector<cplx> tmp(nx * ny);
  auto pass = [&](const cplx* src, cplx* dst, bool along_x) {
    const std::size_t n_line = along_x ? nx : ny;
    const std::size_t n_other = along_x ? ny : nx;
    for (std::size_t o = 0; o < n_other; ++o)
      for (std::size_t i = 0; i < n_line; ++i) {
        cplx acc = 0.0;
        double wsum = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          const long j = static_cast<long>(i) + t;
          if (j < 0 || j >= static_cast<long>(n_line)) continue;
          const std::size_t idx = along_x ? o * nx + static_cast<std::size_t>(j) : static_cast<std::size_t>(j) * nx + o;
          acc += kernel[t + radius] * src[idx];
          wsum += kernel[t + radius];
        }
        const std::size_t out_idx = along_x ? o * nx + i : i * nx + o;
        dst[out_idx] = acc / wsum;
      }
  };
  pass(slice, tmp.data(), true);
  pass(tmp.data(), slice, false);
}

}  // namespace

CoilEstimate estimate_coil_maps(const CMatrix& images, const Dims3& dims, double absolute_floor) {
  const std::size_t m = dims.voxels();
  if (static_cast<std::size_t>(images.rows()) != m) throw ValidationError("coil images do not match dims");
  const RVector rss = images.cwiseAbs2().rowwise().sum().cwiseSqrt();
  const double peak = rss.maxCoeff();
  if (!(peak > 0.0)) throw ValidationError("coil map estimation: all-zero input");
  const double threshold = std::max(0.05 * peak, absolute_floor);

  CoilEstimate est;
  est.maps.dims = dims;
  est.maps.maps = CMatrix::Zero(images.rows(), images.cols());
  est.support.assign(m, 0);
  std::size_t supported = 0;
  for (std::size_t j = 0; j < m; ++j)
    if (rss(static_cast<Eigen::Index>(j)) > threshold) {
      est.support[j] = 1;
      ++supported;
    }
  if (supported == 0) {
    est.warnings.push_back("coil map estimation: no voxel above the support threshold; maps are zero");
    return est;
  }

  for (Eigen::Index c = 0; c < images.cols(); ++c) {
    CVector raw(images.rows());
    for (Eigen::Index j = 0; j < images.rows(); ++j) raw(j) = rss(j) > 0.0 ? images(j, c) / rss(j) : cplx{0.0, 0.0};
    for (std::size_t z = 0; z < dims.nz; ++z) gaussian_lowpass(raw.data() + z * dims.slice_size(), dims.nx, dims.ny, 2.0);
    est.maps.maps.col(c) = raw;
  }
  const RVector sos = est.maps.sum_of_squares();
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (!est.support[j] || !(sos(jj) > 0.0))
      est.maps.maps.row(jj).setZero();
    else
      est.maps.maps.row(jj) /= std::sqrt(sos(jj));
  }
  return est;
}

SubspaceOperator::SubspaceOperator(const EncodingModel& model, CMatrix v) : model_(model), v_(std::move(v)) {
  if (static_cast<std::size_t>(v_.cols()) != model.columns()) throw ValidationError("subspace basis has wrong column count");
}

CVector SubspaceOperator::apply(const CMatrix& u) const { return forward(model_, u * v_); }

CMatrix SubspaceOperator::apply_adjoint(const CVector& d) const { return adjoint(model_, d) * v_.adjoint(); }

CMatrix SubspaceOperator::normal(const CMatrix& u) const { return encoding::normal(model_, u * v_) * v_.adjoint(); }

Container to_container(const KSpaceData& d, bool single_precision) {
  Container c{"KSpaceData", {}, {}};
  c.meta["spatial_dims"] = dims_to_json(d.dims);
  c.meta["coils"] = d.coils;
  c.meta["layout"] = "column, slice, coil, kept line, readout";
  c.meta["R_nominal"] = d.mask.r_nominal();
  c.meta["seed"] = d.mask.seed();
  c.meta["scheme"] = d.mask.scheme();
  c.arrays["samples"] =
      Array::from_complex({d.samples.data(), static_cast<std::size_t>(d.samples.size())},
                          {static_cast<std::size_t>(d.samples.size())}, single_precision);
  c.arrays["kept"] = Array::from_bool(d.mask.raw(), {d.mask.columns(), d.mask.nz(), d.mask.n_pe()});
  return c;
}

KSpaceData kspace_from_container(const Container& c) {
  if (c.kind != "KSpaceData") throw FormatError("container kind '" + c.kind + "' where 'KSpaceData' was expected");
  KSpaceData d;
  d.dims = dims_from_json(c.meta.at("spatial_dims"));
  d.coils = c.meta.at("coils").get<std::size_t>();
  Container mask_c{"SamplingMask", c.meta, {{"kept", c.at("kept")}}};
  d.mask = mask_from_container(mask_c);
  if (d.mask.n_pe() != d.dims.ny || d.mask.nz() != d.dims.nz) throw InvariantError("k-space mask does not match dims");
  const auto values = c.at("samples").to_complex();
  d.samples = Eigen::Map<const CVector>(values.data(), static_cast<Eigen::Index>(values.size()));
  if (static_cast<std::size_t>(d.samples.size()) != d.expected_size())
    throw InvariantError("k-space sample count does not match mask x readout x coils");
  return d;
}

}  // namespace lrcs::encoding
