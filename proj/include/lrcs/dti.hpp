#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrcs/container.hpp"
#include "lrcs/datamodel.hpp"

namespace lrcs::dti {

/// Symmetric tensor components in the order xx, yy, zz, xy, xz, yz (mm^2/s).
using Tensor6 = std::array<double, 6>;

Eigen::Matrix3d to_matrix(const Tensor6& t);
Tensor6 from_matrix(const Eigen::Matrix3d& m);

/// Per-voxel tensors over a masked region. Eigenvalues are sorted descending,
/// negatives clamped to zero, and e1 has a non-negative z component.
struct TensorField {
  Dims3 dims;
  std::vector<std::uint8_t> mask;
  std::vector<Tensor6> tensors;
  std::vector<double> s0;
  std::vector<Vec3> eigenvalues;
  std::vector<Vec3> e1;
  std::size_t clamped_eigenvalues = 0;

  static TensorField from_tensors(const Dims3& dims, std::vector<std::uint8_t> mask, std::vector<Tensor6> tensors,
                                  std::vector<double> s0);
};

/// Mono-exponential signal s0 * exp(-b g^T D g).
double signal(const Tensor6& d, double s0, const ColumnLabel& label);

/// Weighted log-linear least squares fit of every masked voxel over all columns.
TensorField fit_tensors(const CasoratiSeries& magnitude, std::span<const std::uint8_t> mask);

std::vector<double> mean_diffusivity(const TensorField& field);
std::vector<double> fractional_anisotropy(const TensorField& field);
double mean_diffusivity(const Vec3& eigenvalues);
double fractional_anisotropy(const Vec3& eigenvalues);

struct Center {
  double x = 0.0;
  double y = 0.0;
};

/// Mask centroid of each slice (slice centre when the slice is empty).
std::vector<Center> mask_centroids(std::span<const std::uint8_t> mask, const Dims3& dims);

struct HelixAngleMap {
  std::vector<double> degrees;  // NaN outside the mask or at the centre voxel
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

/// Elevation of a unit vector out of the short-axis plane, in (-90, 90].
double helix_angle_of(const Vec3& e1, const Vec3& position_from_center);

HelixAngleMap helix_angle(const TensorField& field, std::span<const Center> centers);

struct RaySample {
  std::size_t voxel = 0;
  double td = 0.0;  // percent transmural depth
};

/// Masked voxels met along one ray with their transmural depth. The endo and
/// epi boundaries sit halfway between the outermost masked voxels and their
/// unmasked neighbours along the ray.
std::vector<RaySample> trace_ray(std::span<const std::uint8_t> mask, const Dims3& dims, std::size_t z,
                                 const Center& center, double angle);

struct RaySlope {
  std::size_t slice = 0;
  std::size_t ray = 0;
  double angle = 0.0;  // radians
  double slope = 0.0;  // degrees per %TD
  double r2 = 0.0;
  std::size_t samples = 0;
};

struct HatResult {
  std::vector<RaySlope> rays;
  std::vector<double> per_slice;  // NaN for slices without a usable ray
  double global = 0.0;
  std::size_t skipped_rays = 0;
};

HatResult compute_hat(std::span<const double> ha, std::span<const std::uint8_t> mask, const Dims3& dims,
                      std::span<const Center> centers, std::size_t n_rays = 25);

enum class Band { Basal, Mid, Apical };

struct AhaSegmentation {
  std::vector<int> segment;  // 1..16 inside the mask, 0 elsewhere
  std::vector<Band> slice_band;
  double reference_angle = 0.0;
};

/// Thirds of the slice stack, extras going to basal first, then mid.
std::vector<Band> default_slice_bands(std::size_t nz);

/// Segment number for an angle (radians, image frame) in a band.
int aha_segment(Band band, double angle, double reference_angle);

AhaSegmentation segment_aha16(std::span<const std::uint8_t> mask, const Dims3& dims, std::span<const Center> centers,
                              double reference_angle, std::optional<std::vector<Band>> bands = std::nullopt);

struct SegmentStat {
  int segment = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

/// Mean/std of per-ray slopes falling in each of the 16 segments.
std::array<SegmentStat, 16> regional_hat(const HatResult& hat, const AhaSegmentation& seg);
/// Mean/std of a voxel map over each segment.
std::array<SegmentStat, 16> regional_mean(std::span<const double> values, const AhaSegmentation& seg);

/// Mean of a map over the mask, ignoring NaN.
double masked_mean(std::span<const double> values, std::span<const std::uint8_t> mask);

/// 8-bit binary PGM of all slices side by side; values outside
/// [level - window/2, level + window/2] are clipped, NaN maps to 0.
void write_pgm(const std::filesystem::path& path, std::span<const double> values, const Dims3& dims, double window,
               double level);

Container to_container(const TensorField& f);
TensorField tensors_from_container(const Container& c);

}  // namespace lrcs::dti
