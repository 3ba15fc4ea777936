#pragma once

// CS-only preliminary solve, phase/subspace estimation and the ADMM + CG
// solver for the phase-corrected low-rank + group-sparse model
//
//   min_U ||d - A(U)||^2 + lambda ||Psi(U V)||_{1,2},  A(U) = Omega F S [P o (U V)].

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lrcs/container.hpp"
#include "lrcs/datamodel.hpp"
#include "lrcs/encoding.hpp"

namespace lrcs::recon {

enum class Method { CsOnly, LrOnly, Lrcs };
enum class PhaseMode { None, LowRes, Proposed };

Method parse_method(const std::string& s);
std::string method_name(Method m);
PhaseMode parse_phase_mode(const std::string& s);
std::string phase_mode_name(PhaseMode p);

struct SolverConfig {
  double lambda = 0.0;
  std::size_t rank = 0;  // 0 = choose from the singular value elbow
  double alpha_decay = 1.55;
  int max_iters = 25;
  double tol = 1e-9;
  int cg_max_iters = 15;
  double cg_tol = 1e-8;
  Method method = Method::Lrcs;
  PhaseMode phase_mode = PhaseMode::Proposed;
  int wavelet_levels = 4;
  std::optional<std::filesystem::path> dump_dir;  // receives the CG iterate on divergence

  void validate() const;
};

json to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const json& j);

struct CgStats {
  int iters = 0;
  double rel_residual = 0.0;
};

struct IterationRecord {
  int iter = 0;
  double delta_u = 0.0;
  double feasibility_gap = 0.0;  // ||Psi U V - G||_F after the dual update
  double alpha = 0.0;
  double rho = 0.0;
  int cg_iters = 0;
  double cg_residual = 0.0;
};

struct RunReport {
  std::string method;
  std::string phase_mode;
  double lambda = 0.0;
  std::size_t rank = 0;
  CgStats initial_cg;
  std::vector<IterationRecord> iterations;
  std::string stop_reason;  // "tolerance", "max_iters" or "zero_data"
  int total_cg_iters = 0;
  double wall_seconds = 0.0;

  json to_json() const;
};

struct AdmmState {
  CMatrix u;  // M x L
  CMatrix g;  // M x N, transform-domain split variable
  CMatrix y;  // M x N, multiplier
  double alpha = 0.0;
  double rho = 0.0;
  int iter = 0;
};

struct ReconResult {
  CMatrix image;  // P o (U V), M x N
  Dims3 dims;
  CMatrix u;
  CMatrix v;
  PhaseMap phase;
  RunReport report;

  /// U V, the phase-corrected series.
  CMatrix corrected() const { return u * v; }
  CasoratiSeries series(std::vector<ColumnLabel> labels) const { return {image, dims, std::move(labels)}; }
};

/// Conjugate gradient on a Hermitian positive (semi)definite operator, warm
/// started from x. Throws NumericalError on NaN or when the residual grows for
/// three consecutive iterations and ends ten times above its starting value.
template <class Op>
CgStats conjugate_gradient(const Op& h, const CMatrix& b, CMatrix& x, int max_iters, double tol,
                           const std::optional<std::filesystem::path>& dump_dir = std::nullopt);

/// Group-sparse ADMM with P = ones and V = identity.
ReconResult reconstruct_cs_only(const encoding::KSpaceData& d, const encoding::EncodingModel& model,
                                const SolverConfig& cfg);

ReconResult reconstruct_lrcs(const encoding::KSpaceData& d, const encoding::EncodingModel& model, const PhaseMap& phase,
                             const CMatrix& v, const SolverConfig& cfg);

/// reconstruct_lrcs with lambda = 0.
ReconResult reconstruct_lr_only(const encoding::KSpaceData& d, const encoding::EncodingModel& model,
                                const PhaseMap& phase, const CMatrix& v, const SolverConfig& cfg);

/// Entrywise exp(i angle(x)); exact zeros map to 1.
PhaseMap estimate_phase_map(const CMatrix& x);

/// Phase of a Hann-apodised zero-filled reconstruction from the common centre block.
PhaseMap estimate_phase_lowres(const encoding::KSpaceData& d, const encoding::EncodingModel& model);

/// First and one-past-last line of the centre block kept in every column and slice.
std::pair<std::size_t, std::size_t> center_block_range(const SamplingMask& mask);

/// Rows: the L leading right singular vectors (conjugated) of x, so x ~ x V^H V.
CMatrix estimate_subspace(const CMatrix& x, std::size_t rank);
/// Subspace of the magnitude |x|.
CMatrix estimate_magnitude_subspace(const CMatrix& x, std::size_t rank);

RVector singular_values(const CMatrix& x);

/// Index in [2, N-1] maximising the second difference of log(sigma).
std::size_t select_rank(const RVector& sigma);
std::size_t select_rank(const CMatrix& x, const PhaseMap& phase, std::optional<std::size_t> override_rank = std::nullopt);

/// P^* o x.
CMatrix phase_corrected(const CMatrix& x, const PhaseMap& phase);

/// {1e-3, 1e-2, 1e-1} * max |Psi A^*(d)|.
std::vector<double> default_lambda_grid(const encoding::KSpaceData& d, const encoding::EncodingModel& model,
                                        int wavelet_levels = 4);

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> candidates;
  std::vector<double> nuclear_norms;
};

/// CS-only reconstruction per candidate; keeps the one with the smallest ||P^* o X||_*.
LambdaSelection select_lambda(const encoding::KSpaceData& d, const encoding::EncodingModel& model,
                              const std::vector<double>& candidates, const SolverConfig& cfg);

/// Whole chain for one method and phase mode: CS-only preliminary solve,
/// phase map, rank and subspace, final solve. `preliminary` reuses an
/// existing CS-only result on the same data.
ReconResult reconstruct(const encoding::KSpaceData& d, const encoding::EncodingModel& model, const SolverConfig& cfg,
                        const ReconResult* preliminary = nullptr);

}  // namespace lrcs::recon

#include "lrcs/recon_cg.hpp"
