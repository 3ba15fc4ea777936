#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrcs/types.hpp"

namespace lrcs {

/// One diffusion encoding (a Casorati column).
struct ColumnLabel {
  double b_value = 0.0;  // s/mm^2
  Vec3 direction = Vec3::Zero();
  int average_index = 0;

  bool is_b0() const { return b_value == 0.0; }
};

/// Standard column ordering: b=0 columns first, then DW columns grouped by average, then direction.
std::vector<ColumnLabel> make_column_labels(std::size_t n_b0, double b_value,
                                            std::span<const Vec3> directions, int n_averages = 1);

/// Complex image series arranged voxels x encodings.
class CasoratiSeries {
 public:
  CasoratiSeries() = default;
  CasoratiSeries(CMatrix data, Dims3 dims, std::vector<ColumnLabel> labels);

  const CMatrix& data() const { return data_; }
  const Dims3& dims() const { return dims_; }
  const std::vector<ColumnLabel>& labels() const { return labels_; }
  std::size_t rows() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(data_.cols()); }

  /// Same geometry and labels, new values.
  CasoratiSeries with_data(CMatrix data) const { return {std::move(data), dims_, labels_}; }

 private:
  CMatrix data_;
  Dims3 dims_;
  std::vector<ColumnLabel> labels_;
};

/// Validates the label invariants (unit directions, unique triples). Throws InvariantError.
void validate_labels(std::span<const ColumnLabel> labels);

/// 4-D complex tensor (nx, ny, nz, N), x fastest.
struct VolumeSeries {
  Dims3 dims;
  std::size_t columns = 0;
  std::vector<cplx> values;
};

CasoratiSeries reshape_to_casorati(const VolumeSeries& volumes, std::vector<ColumnLabel> labels);
VolumeSeries reshape_from_casorati(const CasoratiSeries& series);

/// Kept phase-encode lines, indexed (line, slice, column).
class SamplingMask {
 public:
  SamplingMask() = default;
  SamplingMask(std::size_t n_pe, std::size_t nz, std::size_t columns, double r_nominal, std::uint64_t seed,
               std::string scheme = "proposed");

  std::size_t n_pe() const { return n_pe_; }
  std::size_t nz() const { return nz_; }
  std::size_t columns() const { return columns_; }
  double r_nominal() const { return r_nominal_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& scheme() const { return scheme_; }

  bool kept(std::size_t line, std::size_t z, std::size_t k) const { return kept_[offset(line, z, k)] != 0; }
  void set(std::size_t line, std::size_t z, std::size_t k, bool value) { kept_[offset(line, z, k)] = value ? 1 : 0; }

  std::size_t lines_kept(std::size_t z, std::size_t k) const;
  std::size_t total_kept() const;
  const std::vector<std::uint8_t>& raw() const { return kept_; }
  std::vector<std::uint8_t>& raw() { return kept_; }

  /// Fully sampled lines over kept lines, over all columns and slices.
  double r_measured() const;

 private:
  std::size_t offset(std::size_t line, std::size_t z, std::size_t k) const { return line + n_pe_ * (z + nz_ * k); }

  std::size_t n_pe_ = 0;
  std::size_t nz_ = 0;
  std::size_t columns_ = 0;
  double r_nominal_ = 1.0;
  std::uint64_t seed_ = 0;
  std::string scheme_ = "proposed";
  std::vector<std::uint8_t> kept_;
};

/// Effective acceleration when b=0 columns are fully sampled: 13R/(R+12) for 1 + 12.
double r_true(double r_nominal, std::size_t n_b0, std::size_t n_dw);

/// Unit-magnitude per-entry phase factors.
class PhaseMap {
 public:
  PhaseMap() = default;
  explicit PhaseMap(CMatrix values, double tolerance = 1e-12);

  static PhaseMap ones(std::size_t rows, std::size_t cols);

  const CMatrix& values() const { return values_; }

 private:
  CMatrix values_;
};

/// U (M x L) times V (L x N).
class FactorPair {
 public:
  FactorPair(CMatrix u, CMatrix v);

  const CMatrix& u() const { return u_; }
  const CMatrix& v() const { return v_; }
  std::size_t rank() const { return static_cast<std::size_t>(v_.rows()); }
  CMatrix product() const { return u_ * v_; }

  /// Real degrees of freedom, 2(M+N-L)L.
  std::size_t degrees_of_freedom() const;

 private:
  CMatrix u_;
  CMatrix v_;
};

std::size_t factor_degrees_of_freedom(std::size_t m, std::size_t n, std::size_t l);

/// Coil sensitivities, one column per coil (M x C).
struct CoilMaps {
  Dims3 dims;
  CMatrix maps;

  std::size_t coils() const { return static_cast<std::size_t>(maps.cols()); }
  /// Per-voxel sum over coils of |map|^2.
  RVector sum_of_squares() const;
  /// Throws InvariantError when a voxel flagged in `support` has zero sensitivity.
  void validate(std::span<const std::uint8_t> support) const;
};

}  // namespace lrcs
