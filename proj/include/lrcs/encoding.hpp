#pragma once

// Forward signal model d = Omega(F S [P o X]) and its adjoint.
//
// The phase-encode axis is y and the readout axis x. k-space is centred: line
// index l corresponds to spatial frequency l - n/2, so for n_pe = 64 the four
// centremost lines are 30..33. The 2-D DFT is unitary in both directions.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrcs/container.hpp"
#include "lrcs/datamodel.hpp"

namespace lrcs::encoding {

enum class MaskScheme { Proposed, LowResLattice };

MaskScheme parse_scheme(const std::string& name);
std::string scheme_name(MaskScheme s);

/// Variable-density random line mask: 4 centre lines forced, the rest of the
/// ceil(n_pe/R) lines drawn without replacement from a Gaussian density
/// (sigma = n_pe/6) centred at DC. b=0 columns are fully sampled.
SamplingMask make_sampling_mask(std::size_t n_pe, std::size_t nz, std::span<const ColumnLabel> labels, double r,
                                std::uint64_t seed);

/// Half of the kept lines form a contiguous centre block (at least 4 lines);
/// the remainder sit on a uniform lattice with a per-(slice, column) offset.
SamplingMask make_lowres_lattice_mask(std::size_t n_pe, std::size_t nz, std::span<const ColumnLabel> labels, double r,
                                      std::uint64_t seed);

SamplingMask make_mask(MaskScheme scheme, std::size_t n_pe, std::size_t nz, std::span<const ColumnLabel> labels,
                       double r, std::uint64_t seed);

SamplingMask full_mask(std::size_t n_pe, std::size_t nz, std::size_t columns);

/// Width of the contiguous block of lines around DC kept in every column.
std::size_t common_center_block(const SamplingMask& mask);

struct EncodingModel {
  CoilMaps coils;
  SamplingMask mask;
  std::optional<CMatrix> phase;  // unit magnitude, M x N

  const Dims3& dims() const { return coils.dims; }
  std::size_t columns() const { return mask.columns(); }
  /// Throws ValidationError when coils, mask and phase disagree on geometry.
  void validate() const;
};

/// Kept samples ordered column, slice, coil, kept line (ascending), readout.
struct KSpaceData {
  Dims3 dims;
  std::size_t coils = 0;
  SamplingMask mask;
  CVector samples;

  std::size_t expected_size() const { return mask.total_kept() * dims.nx * coils; }
  /// Offset of (column k, slice z, coil c) block; lines within it follow mask order.
  std::size_t block_offset(std::size_t k, std::size_t z, std::size_t c) const;
};

CVector forward(const EncodingModel& model, const CMatrix& x);
CMatrix adjoint(const EncodingModel& model, const CVector& d);
/// adjoint(forward(x)) without packing the samples.
CMatrix normal(const EncodingModel& model, const CMatrix& x);

KSpaceData forward_data(const EncodingModel& model, const CMatrix& x);
CMatrix adjoint_data(const EncodingModel& model, const KSpaceData& d);

/// Keep only the lines of `mask` from fully sampled data.
KSpaceData undersample(const KSpaceData& full, const SamplingMask& mask);

/// Coil images of each column (M x C per column), no Fourier encoding.
std::vector<CMatrix> coil_images(const KSpaceData& full);

/// Adds i.i.d. N(0, sigma^2) to real and imaginary parts. sigma <= 0 or infinite SNR leaves data untouched.
KSpaceData add_noise(const KSpaceData& data, double sigma, std::uint64_t seed);
/// sigma = mean |s0| over the object / snr; snr = +inf gives 0.
double noise_sigma(double mean_s0, double snr);

struct CoilEstimate {
  CoilMaps maps;
  std::vector<std::uint8_t> support;
  std::vector<std::string> warnings;
};

/// Coil image over root-sum-of-squares, Gaussian low-pass (sigma 2 voxels,
/// in-plane), renormalised to unit sum-of-squares, zero below the support
/// threshold (5% of the maximum RSS, or `absolute_floor` if larger).
CoilEstimate estimate_coil_maps(const CMatrix& b0_coil_images, const Dims3& dims, double absolute_floor = 0.0);

/// Subspace-constrained operator A(U) = Omega(F S [P o (U V)]).
class SubspaceOperator {
 public:
  SubspaceOperator(const EncodingModel& model, CMatrix v);

  const CMatrix& v() const { return v_; }
  CVector apply(const CMatrix& u) const;
  CMatrix apply_adjoint(const CVector& d) const;
  CMatrix normal(const CMatrix& u) const;

 private:
  const EncodingModel& model_;
  CMatrix v_;
};

Container to_container(const KSpaceData& d, bool single_precision = false);
KSpaceData kspace_from_container(const Container& c);

}  // namespace lrcs::encoding
