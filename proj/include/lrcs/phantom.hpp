#pragma once

// Synthetic left-ventricle diffusion phantom with analytically known tensors.

#include <cstdint>
#include <optional>
#include <vector>

#include "lrcs/container.hpp"
#include "lrcs/datamodel.hpp"
#include "lrcs/dti.hpp"
#include "lrcs/encoding.hpp"

namespace lrcs::phantom {

/// Fixed 12-direction electrostatic-repulsion gradient table.
const std::vector<Vec3>& default_directions();

struct PhantomConfig {
  Dims3 grid{64, 64, 4};
  std::vector<dti::Center> lv_center;  // one per slice; empty = image centre
  double r_endo = 12.0;
  double r_epi = 24.0;
  double ha_endo = 60.0;   // degrees
  double ha_epi = -60.0;   // degrees
  double md_true = 1.0e-3;  // mm^2/s
  double fa_true = 0.5;
  std::vector<double> b_values{0.0, 1000.0};
  std::vector<Vec3> directions = default_directions();
  std::size_t n_coils = 4;
  double snr = 12.0;  // +inf disables noise
  int phase_order = 2;
  double phase_amplitude = 12.566370614359172;  // max |coefficient| of each phase monomial, radians
  double background = 0.1;                     // fraction of s0 outside the myocardium
  std::uint64_t seed = 1;

  std::vector<dti::Center> centers() const;
  std::vector<ColumnLabel> labels() const;
  /// Throws ValidationError naming the violated constraint.
  void validate() const;
};

json to_json(const PhantomConfig& cfg);
PhantomConfig config_from_json(const json& j);

struct GroundTruth {
  PhantomConfig config;
  dti::TensorField tensors;
  std::vector<double> ha_map;  // degrees, NaN outside the mask
  std::vector<double> td_map;  // transmural depth in [0, 1], NaN outside
  double hat_global = 0.0;     // degrees per %TD
  std::vector<double> md_map;
  std::vector<std::uint8_t> myocardium_mask;
  CasoratiSeries clean_series;  // magnitude signal, no phase
  PhaseMap phase;
  CoilMaps coils;

  /// P o clean_series: the complex image series the scanner sees.
  CMatrix phased_series() const;
  double mean_s0() const;
};

GroundTruth build_phantom(const PhantomConfig& cfg);

/// Axially symmetric eigenvalues (l1, l2, l2) with the given mean and FA.
Vec3 eigenvalues_for(double md, double fa);

/// Fully sampled coil k-space of the phased series with complex Gaussian noise at cfg.snr.
encoding::KSpaceData acquire(const GroundTruth& truth, std::uint64_t noise_seed);

/// Writes every ground-truth array under `dir` (one container per field plus truth.json).
void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& truth);

}  // namespace lrcs::phantom
