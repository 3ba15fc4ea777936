#pragma once

// Multi-subject phantom experiments: cohort generation, R sweeps over the
// method x phase-mode grid, DTI analysis and aggregate statistics.
//
// Output layout under output_dir:
//   plan.json, cells.csv, stats.csv, pmap_<metric>_R<R>_<method>_<phase>.csv
//   subject_<i>/truth.json, subject_<i>/reference/{metrics.json, hat_rays.csv, segments_hat.csv, segments_md.csv}
//   subject_<i>/R<R>/<method>/<phase>/{report.json, metrics.json, hat_rays.csv, segments_*.csv}
// plus containers and PGM previews when write_arrays / write_previews are set.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrcs/dti.hpp"
#include "lrcs/phantom.hpp"
#include "lrcs/recon.hpp"
#include "lrcs/stats.hpp"

namespace lrcs::pipeline {

struct Jitter {
  double ha_deg = 10.0;     // +- on each HA endpoint
  double md_frac = 0.10;    // relative +- on md_true
  double geometry_vox = 2.0;  // +- on the LV centre and both radii
};

struct ExperimentPlan {
  std::size_t n_subjects = 6;
  std::uint64_t master_seed = 1;
  phantom::PhantomConfig base;
  Jitter jitter;
  std::vector<double> r_list{2.0, 4.0, 6.0, 8.0};
  std::vector<recon::Method> methods{recon::Method::CsOnly, recon::Method::LrOnly, recon::Method::Lrcs};
  std::vector<recon::PhaseMode> phase_modes{recon::PhaseMode::None, recon::PhaseMode::LowRes,
                                            recon::PhaseMode::Proposed};
  recon::SolverConfig solver;     // lambda and rank are filled per subject unless set
  double lambda_rel = 0.01;       // lambda = lambda_rel * max |Psi A^*(d)| of the fully sampled data
  bool select_lambda = false;     // use the nuclear-norm grid search instead
  std::size_t rank = 0;           // 0 = count above the noise edge of the fully sampled reconstruction, per subject
  bool estimate_coils = true;     // coil maps from the b=0 column instead of the simulated ones
  double aha_reference_angle = 0.0;  // radians
  std::filesystem::path output_dir = "experiment";
  bool write_arrays = false;
  bool write_previews = false;

  void validate() const;
};

json to_json(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(const json& j);

/// Per-subject phantom configs derived deterministically from the master seed.
std::vector<phantom::PhantomConfig> cohort_configs(const ExperimentPlan& plan);

struct Analysis {
  dti::TensorField tensors;
  std::vector<double> ha;
  std::vector<double> md;
  std::vector<double> fa;
  dti::HatResult hat;
  dti::AhaSegmentation segmentation;
  std::array<dti::SegmentStat, 16> regional_hat{};
  std::array<dti::SegmentStat, 16> regional_md{};
  double global_hat = 0.0;
  double global_md = 0.0;
};

/// HA, HAT, MD, FA and AHA-16 regional summaries of a fitted tensor field over `mask`.
Analysis analyze_tensors(dti::TensorField tensors, std::span<const std::uint8_t> mask, double aha_reference_angle);

/// Tensor fit of |image| followed by analyze_tensors.
Analysis analyze(const CMatrix& image, const Dims3& dims, const std::vector<ColumnLabel>& labels,
                 std::span<const std::uint8_t> mask, double aha_reference_angle);

json analysis_json(const Analysis& a);
void write_analysis(const std::filesystem::path& dir, const Analysis& a, const Dims3& dims, bool arrays, bool previews);

struct CellResult {
  std::size_t subject = 0;
  double r = 1.0;
  recon::Method method = recon::Method::Lrcs;
  recon::PhaseMode phase_mode = recon::PhaseMode::Proposed;
  bool ok = false;
  std::string error;
  double hat = 0.0;
  double md = 0.0;
  double hat_ref = 0.0;
  double md_ref = 0.0;
  double hat_bias = 0.0;
  double md_bias = 0.0;
  double nrmse = 0.0;  // magnitude, inside the myocardium, against the reference
  std::size_t rank = 0;
  double lambda = 0.0;
  int cg_iters = 0;
  double wall_seconds = 0.0;
  std::array<double, 16> regional_hat{};
  std::array<double, 16> regional_md{};
  std::array<double, 16> regional_hat_ref{};
  std::array<double, 16> regional_md_ref{};
};

struct StatRow {
  double r = 1.0;
  recon::Method method = recon::Method::Lrcs;
  recon::PhaseMode phase_mode = recon::PhaseMode::Proposed;
  std::string metric;  // "HAT" or "MD"
  std::size_t n = 0;
  stats::BiasSummary bias;
  stats::IccResult icc;
  stats::WilcoxonResult wilcoxon;
};

struct SubjectReference {
  double hat = 0.0;
  double md = 0.0;
  double hat_truth = 0.0;  // analysis of the noiseless magnitude series
  double md_truth = 0.0;
  std::array<double, 16> regional_hat{};
  std::array<double, 16> regional_md{};
};

struct ExperimentReport {
  std::vector<SubjectReference> references;
  std::vector<CellResult> cells;
  std::vector<StatRow> stats;
};

ExperimentReport run_experiment(const ExperimentPlan& plan);

/// Cells CSV: one row per (subject, R, method, phase mode); no timing columns.
void write_cells_csv(const std::filesystem::path& path, const std::vector<CellResult>& cells);
std::vector<CellResult> read_cells_csv(const std::filesystem::path& path);
void write_stats_csv(const std::filesystem::path& path, const std::vector<StatRow>& rows);

/// Aggregate statistics and regional p-maps from cell rows; p-maps are written when dir is non-empty.
std::vector<StatRow> evaluate(const std::vector<CellResult>& cells, const std::filesystem::path& pmap_dir = {});

}  // namespace lrcs::pipeline
