#include "lrcs/recon.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "lrcs/transforms.hpp"

namespace lrcs::recon {

namespace detail {

void dump_iterate(const std::filesystem::path& dir, const CMatrix& x) {
  Container c{"CgIterate", {}, {}};
  c.meta["rows"] = x.rows();
  c.meta["cols"] = x.cols();
  // Column-major M x L is row-major L x M.
  c.arrays["x"] = Array::from_complex({x.data(), static_cast<std::size_t>(x.size())},
                                      {static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(x.rows())});
  write_container(dir / "cg_iterate", c);
}

}  // namespace detail

namespace {

using encoding::EncodingModel;
using encoding::KSpaceData;

void check_data(const KSpaceData& d, const EncodingModel& model) {
  model.validate();
  if (!(d.dims == model.dims())) throw ValidationError("k-space data and coil maps disagree on image dims");
  if (d.coils != model.coils.coils()) throw ValidationError("k-space data and coil maps disagree on coil count");
  if (d.mask.raw() != model.mask.raw()) throw ValidationError("k-space data were not acquired with the model's mask");
  if (static_cast<std::size_t>(d.samples.size()) != d.expected_size())
    throw ValidationError("k-space sample count does not match the mask");
}

bool all_finite(const CMatrix& x) { return x.allFinite(); }

ReconResult run_admm(const KSpaceData& d, const EncodingModel& model, const CMatrix& v, double lambda,
                     const SolverConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_data(d, model);
  const transforms::Wavelet3D psi(transforms::WaveletSpec::make(model.dims(), cfg.wavelet_levels));
  const encoding::SubspaceOperator a(model, v);
  const CMatrix vvh = v * v.adjoint();
  const CMatrix atd = a.apply_adjoint(d.samples);

  ReconResult out;
  out.report.method = method_name(cfg.method);
  out.report.phase_mode = phase_mode_name(cfg.phase_mode);
  out.report.lambda = lambda;
  out.report.rank = static_cast<std::size_t>(v.rows());

  AdmmState s;
  s.u = CMatrix::Zero(atd.rows(), atd.cols());
  auto gram = [&](const CMatrix& u) { return a.normal(u); };
  out.report.initial_cg = conjugate_gradient(gram, atd, s.u, cfg.cg_max_iters, cfg.cg_tol, cfg.dump_dir);
  out.report.total_cg_iters = out.report.initial_cg.iters;
  if (!all_finite(s.u)) throw NumericalError("non-finite initial estimate");

  out.report.stop_reason = "max_iters";
  if (lambda == 0.0) {
    // rho = lambda / alpha vanishes, so the split and multiplier drop out and
    // the data-consistency solve above is the whole reconstruction.
    out.report.stop_reason = "single_solve";
  } else {
    CMatrix w = psi.forward(s.u * v);
    s.alpha = w.cwiseAbs().maxCoeff();
    if (s.alpha == 0.0) {
      out.report.stop_reason = "zero_data";
    } else {
      s.rho = lambda / s.alpha;
      s.y = CMatrix::Zero(w.rows(), w.cols());
      for (s.iter = 1; s.iter <= cfg.max_iters; ++s.iter) {
        s.g = transforms::group_shrink(w + s.y / s.rho, s.alpha);
        const double half_rho = 0.5 * s.rho;
        const CMatrix rhs = atd + half_rho * (psi.adjoint(s.g - s.y / s.rho) * v.adjoint());
        auto h = [&](const CMatrix& u) -> CMatrix { return a.normal(u) + half_rho * (u * vvh); };
        CMatrix next = s.u;
        const CgStats cg = conjugate_gradient(h, rhs, next, cfg.cg_max_iters, cfg.cg_tol, cfg.dump_dir);
        if (!all_finite(next)) throw NumericalError("non-finite iterate at ADMM iteration " + std::to_string(s.iter));
        const double delta = (next - s.u).norm();
        s.u = std::move(next);
        w = psi.forward(s.u * v);
        const CMatrix split = w - s.g;
        s.y += s.rho * split;
        out.report.iterations.push_back({s.iter, delta, split.norm(), s.alpha, s.rho, cg.iters, cg.rel_residual});
        out.report.total_cg_iters += cg.iters;
        s.alpha /= cfg.alpha_decay;
        s.rho = lambda / s.alpha;
        if (delta <= cfg.tol) {
          out.report.stop_reason = "tolerance";
          break;
        }
      }
    }
  }

  const CMatrix uv = s.u * v;
  out.phase = model.phase ? PhaseMap(*model.phase, 1e-6) : PhaseMap::ones(uv.rows(), uv.cols());
  out.image = model.phase ? CMatrix(model.phase->cwiseProduct(uv)) : uv;
  out.dims = model.dims();
  out.u = std::move(s.u);
  out.v = v;
  out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

EncodingModel without_phase(const EncodingModel& model) {
  EncodingModel m = model;
  m.phase.reset();
  return m;
}

}  // namespace

Method parse_method(const std::string& s) {
  if (s == "cs" || s == "cs_only" || s == "CS_ONLY") return Method::CsOnly;
  if (s == "lr" || s == "lr_only" || s == "LR_ONLY") return Method::LrOnly;
  if (s == "lrcs" || s == "LRCS") return Method::Lrcs;
  throw ValidationError("unknown method '" + s + "' (expected cs, lr or lrcs)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::CsOnly: return "cs";
    case Method::LrOnly: return "lr";
    case Method::Lrcs: return "lrcs";
  }
  return "lrcs";
}

PhaseMode parse_phase_mode(const std::string& s) {
  if (s == "none" || s == "NONE") return PhaseMode::None;
  if (s == "lowres" || s == "LOWRES") return PhaseMode::LowRes;
  if (s == "proposed" || s == "PROPOSED") return PhaseMode::Proposed;
  throw ValidationError("unknown phase mode '" + s + "' (expected none, lowres or proposed)");
}

std::string phase_mode_name(PhaseMode p) {
  switch (p) {
    case PhaseMode::None: return "none";
    case PhaseMode::LowRes: return "lowres";
    case PhaseMode::Proposed: return "proposed";
  }
  return "proposed";
}

void SolverConfig::validate() const {
  if (!(alpha_decay > 1.0)) throw ValidationError("alpha_decay must exceed 1");
  if (max_iters < 1) throw ValidationError("max_iters must be at least 1");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
  if (cg_max_iters < 1) throw ValidationError("cg_max_iters must be at least 1");
  if (!(tol >= 0.0) || !(cg_tol >= 0.0)) throw ValidationError("tolerances must be non-negative");
}

json to_json(const SolverConfig& c) {
  return {{"lambda", c.lambda},       {"rank", c.rank},
          {"alpha_decay", c.alpha_decay}, {"max_iters", c.max_iters},
          {"tol", c.tol},             {"cg_max_iters", c.cg_max_iters},
          {"cg_tol", c.cg_tol},       {"method", method_name(c.method)},
          {"phase_mode", phase_mode_name(c.phase_mode)},
          {"wavelet", {{"family", "symlet-4"}, {"levels", c.wavelet_levels}, {"boundary", "periodic"}}}};
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig c;
  try {
    c.lambda = j.value("lambda", c.lambda);
    c.rank = j.value("rank", c.rank);
    c.alpha_decay = j.value("alpha_decay", c.alpha_decay);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.tol = j.value("tol", c.tol);
    c.cg_max_iters = j.value("cg_max_iters", c.cg_max_iters);
    c.cg_tol = j.value("cg_tol", c.cg_tol);
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("phase_mode")) c.phase_mode = parse_phase_mode(j.at("phase_mode").get<std::string>());
    if (j.contains("wavelet")) c.wavelet_levels = j.at("wavelet").value("levels", c.wavelet_levels);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed solver config: ") + e.what());
  }
  c.validate();
  return c;
}

json RunReport::to_json() const {
  json iters = json::array();
  for (const auto& r : iterations)
    iters.push_back({{"iter", r.iter},
                     {"delta_u", r.delta_u},
                     {"feasibility_gap", r.feasibility_gap},
                     {"alpha", r.alpha},
                     {"rho", r.rho},
                     {"cg_iters", r.cg_iters},
                     {"cg_residual", r.cg_residual}});
  return {{"method", method},
          {"phase_mode", phase_mode},
          {"lambda", lambda},
          {"rank", rank},
          {"initial_cg", {{"iters", initial_cg.iters}, {"residual", initial_cg.rel_residual}}},
          {"iterations", iters},
          {"stop_reason", stop_reason},
          {"total_cg_iters", total_cg_iters},
          {"wall_seconds", wall_seconds}};
}

ReconResult reconstruct_cs_only(const KSpaceData& d, const EncodingModel& model, const SolverConfig& cfg) {
  cfg.validate();
  if (model.phase) throw ValidationError("CS-only reconstruction takes no phase map");
  const auto n = static_cast<Eigen::Index>(model.columns());
  SolverConfig c = cfg;
  c.method = Method::CsOnly;
  ReconResult r = run_admm(d, model, CMatrix::Identity(n, n), cfg.lambda, c);
  r.report.phase_mode = "none";
  return r;
}

ReconResult reconstruct_lrcs(const KSpaceData& d, const EncodingModel& model, const PhaseMap& phase, const CMatrix& v,
                             const SolverConfig& cfg) {
  cfg.validate();
  if (v.rows() < 1 || static_cast<std::size_t>(v.cols()) != model.columns())
    throw ValidationError("subspace basis must be L x N with L >= 1");
  Eigen::JacobiSVD<CMatrix> svd(v);
  const RVector sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-10 * sv(0)) throw ValidationError("subspace basis is rank deficient");
  EncodingModel m = model;
  m.phase = phase.values();
  return run_admm(d, m, v, cfg.lambda, cfg);
}

ReconResult reconstruct_lr_only(const KSpaceData& d, const EncodingModel& model, const PhaseMap& phase,
                                const CMatrix& v, const SolverConfig& cfg) {
  SolverConfig c = cfg;
  c.lambda = 0.0;
  c.method = Method::LrOnly;
  ReconResult r = reconstruct_lrcs(d, model, phase, v, c);
  r.report.lambda = 0.0;
  return r;
}

PhaseMap estimate_phase_map(const CMatrix& x) {
  if (!x.allFinite()) throw ValidationError("phase estimate needs a finite image series");
  CMatrix p(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k)
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      const cplx z = x(j, k);
      p(j, k) = z == cplx(0.0, 0.0) ? cplx(1.0, 0.0) : std::polar(1.0, std::arg(z));
    }
  return PhaseMap(std::move(p));
}

std::pair<std::size_t, std::size_t> center_block_range(const SamplingMask& mask) {
  const std::size_t dc = mask.n_pe() / 2;
  std::size_t lo = 0, hi = mask.n_pe();
  for (std::size_t k = 0; k < mask.columns(); ++k)
    for (std::size_t z = 0; z < mask.nz(); ++z) {
      if (!mask.kept(dc, z, k)) return {dc, dc};
      std::size_t a = dc;
      while (a > 0 && mask.kept(a - 1, z, k)) --a;
      std::size_t b = dc + 1;
      while (b < mask.n_pe() && mask.kept(b, z, k)) ++b;
      lo = std::max(lo, a);
      hi = std::min(hi, b);
    }
  return {lo, hi};
}

PhaseMap estimate_phase_lowres(const KSpaceData& d, const EncodingModel& model) {
  check_data(d, without_phase(model));
  const auto [lo, hi] = center_block_range(d.mask);
  if (hi <= lo + 1) throw ValidationError("sampling mask lacks a contiguous centre block for low-resolution phase");
  const std::size_t width = hi - lo, nx = d.dims.nx;

  SamplingMask center(d.mask.n_pe(), d.mask.nz(), d.mask.columns(), d.mask.r_nominal(), d.mask.seed(), "center");
  for (std::size_t k = 0; k < d.mask.columns(); ++k)
    for (std::size_t z = 0; z < d.mask.nz(); ++z)
      for (std::size_t l = lo; l < hi; ++l) center.set(l, z, k, true);

  KSpaceData low{d.dims, d.coils, center, CVector()};
  low.samples = CVector::Zero(static_cast<Eigen::Index>(low.expected_size()));
  std::vector<double> hann(width);
  for (std::size_t i = 0; i < width; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(width + 1));
  for (std::size_t k = 0; k < d.mask.columns(); ++k)
    for (std::size_t z = 0; z < d.mask.nz(); ++z) {
      // Position of line lo among the kept lines of this (slice, column).
      std::size_t first = 0;
      for (std::size_t l = 0; l < lo; ++l) first += d.mask.kept(l, z, k) ? 1 : 0;
      for (std::size_t c = 0; c < d.coils; ++c) {
        const std::size_t src = d.block_offset(k, z, c) + first * nx;
        const std::size_t dst = low.block_offset(k, z, c);
        for (std::size_t i = 0; i < width; ++i)
          for (std::size_t x = 0; x < nx; ++x)
            low.samples(static_cast<Eigen::Index>(dst + i * nx + x)) =
                hann[i] * d.samples(static_cast<Eigen::Index>(src + i * nx + x));
      }
    }
  EncodingModel m = without_phase(model);
  m.mask = center;
  return estimate_phase_map(encoding::adjoint_data(m, low));
}

RVector singular_values(const CMatrix& x) {
  Eigen::JacobiSVD<CMatrix> svd(x);
  return svd.singularValues();
}

CMatrix estimate_subspace(const CMatrix& x, std::size_t rank) {
  if (rank < 1 || rank > static_cast<std::size_t>(x.cols()))
    throw ValidationError("subspace rank must lie in [1, N]");
  Eigen::JacobiSVD<CMatrix> svd(x, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed while estimating the temporal subspace");
  return svd.matrixV().leftCols(static_cast<Eigen::Index>(rank)).adjoint();
}

CMatrix estimate_magnitude_subspace(const CMatrix& x, std::size_t rank) {
  return estimate_subspace(x.cwiseAbs().cast<cplx>(), rank);
}

std::size_t select_rank(const RVector& sigma) {
  const auto n = static_cast<std::size_t>(sigma.size());
  if (n < 3) return n;
  const double floor = std::max(sigma(0) * 1e-16, std::numeric_limits<double>::min());
  std::vector<double> logs(n);
  for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(std::max(sigma(static_cast<Eigen::Index>(i)), floor));
  // Candidates are restricted to the admissible range [2, N-1] before the
  // argmax; the dominant first drop otherwise always wins.
  std::size_t best = 2;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double d2 = logs[i - 1] - 2.0 * logs[i] + logs[i + 1];
    if (d2 > best_val) {
      best_val = d2;
      best = i;
    }
  }
  return std::clamp<std::size_t>(best, 2, n - 1);
}

std::size_t select_rank(const CMatrix& x, const PhaseMap& phase, std::optional<std::size_t> override_rank) {
  if (override_rank) return *override_rank;
  return select_rank(singular_values(phase_corrected(x, phase)));
}

CMatrix phase_corrected(const CMatrix& x, const PhaseMap& phase) {
  if (x.rows() != phase.values().rows() || x.cols() != phase.values().cols())
    throw ValidationError("phase map does not match the image series");
  return phase.values().conjugate().cwiseProduct(x);
}

std::vector<double> default_lambda_grid(const KSpaceData& d, const EncodingModel& model, int wavelet_levels) {
  const EncodingModel m = without_phase(model);
  check_data(d, m);
  const transforms::Wavelet3D psi(transforms::WaveletSpec::make(m.dims(), wavelet_levels));
  const double peak = psi.forward(encoding::adjoint_data(m, d)).cwiseAbs().maxCoeff();
  return {1e-3 * peak, 1e-2 * peak, 1e-1 * peak};
}

LambdaSelection select_lambda(const KSpaceData& d, const EncodingModel& model, const std::vector<double>& candidates,
                              const SolverConfig& cfg) {
  if (candidates.empty()) throw ValidationError("lambda selection needs at least one candidate");
  LambdaSelection out;
  out.candidates = candidates;
  if (candidates.size() == 1) {
    out.lambda = candidates.front();
    return out;
  }
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : candidates) {
    SolverConfig c = cfg;
    c.lambda = lambda;
    const ReconResult r = reconstruct_cs_only(d, without_phase(model), c);
    const CMatrix& x = r.image;
    const double nuclear = singular_values(phase_corrected(x, estimate_phase_map(x))).sum();
    out.nuclear_norms.push_back(nuclear);
    if (nuclear < best) {
      best = nuclear;
      out.lambda = lambda;
    }
  }
  return out;
}

ReconResult reconstruct(const KSpaceData& d, const EncodingModel& model, const SolverConfig& cfg,
                        const ReconResult* preliminary) {
  const EncodingModel base = without_phase(model);
  if (cfg.method == Method::CsOnly) return reconstruct_cs_only(d, base, cfg);

  ReconResult fresh;
  if (!preliminary) {
    SolverConfig c = cfg;
    c.method = Method::CsOnly;
    fresh = reconstruct_cs_only(d, base, c);
    preliminary = &fresh;
  }
  const CMatrix& xt = preliminary->image;
  PhaseMap phase;
  switch (cfg.phase_mode) {
    case PhaseMode::None: phase = PhaseMap::ones(static_cast<std::size_t>(xt.rows()), static_cast<std::size_t>(xt.cols())); break;
    case PhaseMode::Proposed: phase = estimate_phase_map(xt); break;
    case PhaseMode::LowRes: phase = estimate_phase_lowres(d, base); break;
  }
  const CMatrix corrected = phase_corrected(xt, phase);
  const std::size_t rank = cfg.rank ? cfg.rank : select_rank(singular_values(corrected));
  const CMatrix v = estimate_subspace(corrected, rank);
  ReconResult r = cfg.method == Method::LrOnly ? reconstruct_lr_only(d, base, phase, v, cfg)
                                               : reconstruct_lrcs(d, base, phase, v, cfg);
  r.report.phase_mode = phase_mode_name(cfg.phase_mode);
  r.report.wall_seconds += preliminary == &fresh ? fresh.report.wall_seconds : 0.0;
  return r;
}

}  // namespace lrcs::recon
