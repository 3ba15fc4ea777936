#include "lrcs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "lrcs/threading.hpp"
#include "lrcs/transforms.hpp"

namespace lrcs::pipeline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Seed purposes within a subject.
enum : std::uint64_t { kJitter = 0, kPhantom = 1, kNoise = 2, kMask = 3 };

std::string r_tag(double r) {
  std::ostringstream os;
  os << "R" << r;
  return os.str();
}

std::string subject_tag(std::size_t i) {
  std::ostringstream os;
  os << "subject_" << (i + 1 < 10 ? "0" : "") << i + 1;
  return os.str();
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

// Components of |x| standing above the noise bulk. Pure noise in an M x N
// block has singular values within s (sqrt(M) +- sqrt(N)), so the smallest
// one fixes the upper edge.
std::size_t noise_edge_rank(const CMatrix& x) {
  const RVector sigma = recon::singular_values(x.cwiseAbs().cast<cplx>());
  const double m = std::sqrt(static_cast<double>(x.rows())), n = std::sqrt(static_cast<double>(x.cols()));
  const double edge = sigma(sigma.size() - 1) * (m + n) / (m - n);
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(sigma.size()) && sigma(static_cast<Eigen::Index>(rank)) > edge) ++rank;
  return std::clamp<std::size_t>(rank, 2, static_cast<std::size_t>(sigma.size()) - 1);
}

double masked_nrmse(const CMatrix& rec, const CMatrix& ref, std::span<const std::uint8_t> mask) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < ref.rows(); ++j) {
    if (!mask[static_cast<std::size_t>(j)]) continue;
    for (Eigen::Index k = 0; k < ref.cols(); ++k) {
      const double e = std::abs(rec(j, k)) - std::abs(ref(j, k));
      num += e * e;
      den += std::norm(ref(j, k));
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : kNaN;
}

std::array<double, 16> segment_means(const std::array<dti::SegmentStat, 16>& s) {
  std::array<double, 16> out{};
  for (std::size_t i = 0; i < 16; ++i) out[i] = s[i].n ? s[i].mean : kNaN;
  return out;
}

double safe_bias(double ref, double rec) {
  if (ref == 0.0 || !std::isfinite(ref) || !std::isfinite(rec)) return kNaN;
  return stats::normalized_bias(ref, rec);
}

void write_segments_csv(const std::filesystem::path& path, const std::array<dti::SegmentStat, 16>& s) {
  auto out = open_csv(path);
  out << "segment,mean,std,n\n";
  for (const auto& seg : s) out << seg.segment << ',' << seg.mean << ',' << seg.stddev << ',' << seg.n << '\n';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (n_subjects == 0) throw ValidationError("plan needs at least one subject");
  if (r_list.empty()) throw ValidationError("plan needs at least one acceleration factor");
  for (double r : r_list)
    if (!(r >= 1.0)) throw ValidationError("acceleration factors must be >= 1");
  if (methods.empty() || phase_modes.empty()) throw ValidationError("plan needs methods and phase modes");
  if (!(lambda_rel >= 0.0)) throw ValidationError("lambda_rel must be non-negative");
  if (jitter.ha_deg < 0.0 || jitter.md_frac < 0.0 || jitter.md_frac >= 1.0 || jitter.geometry_vox < 0.0)
    throw ValidationError("jitter ranges must be non-negative (md_frac < 1)");
  base.validate();
  solver.validate();
}

json to_json(const ExperimentPlan& p) {
  json methods = json::array(), phases = json::array();
  for (auto m : p.methods) methods.push_back(recon::method_name(m));
  for (auto m : p.phase_modes) phases.push_back(recon::phase_mode_name(m));
  return {{"n_subjects", p.n_subjects},
          {"master_seed", p.master_seed},
          {"phantom", phantom::to_json(p.base)},
          {"jitter", {{"ha_deg", p.jitter.ha_deg}, {"md_frac", p.jitter.md_frac}, {"geometry_vox", p.jitter.geometry_vox}}},
          {"R_list", p.r_list},
          {"methods", methods},
          {"phase_modes", phases},
          {"solver", recon::to_json(p.solver)},
          {"lambda_rel", p.lambda_rel},
          {"select_lambda", p.select_lambda},
          {"rank", p.rank},
          {"estimate_coils", p.estimate_coils},
          {"aha_reference_angle", p.aha_reference_angle},
          {"output_dir", p.output_dir.string()},
          {"write_arrays", p.write_arrays},
          {"write_previews", p.write_previews}};
}

ExperimentPlan plan_from_json(const json& j) {
  ExperimentPlan p;
  try {
    p.n_subjects = j.value("n_subjects", p.n_subjects);
    p.master_seed = j.value("master_seed", p.master_seed);
    if (j.contains("phantom")) p.base = phantom::config_from_json(j.at("phantom"));
    if (j.contains("jitter")) {
      const auto& jj = j.at("jitter");
      p.jitter.ha_deg = jj.value("ha_deg", p.jitter.ha_deg);
      p.jitter.md_frac = jj.value("md_frac", p.jitter.md_frac);
      p.jitter.geometry_vox = jj.value("geometry_vox", p.jitter.geometry_vox);
    }
    if (j.contains("R_list")) p.r_list = j.at("R_list").get<std::vector<double>>();
    if (j.contains("methods")) {
      p.methods.clear();
      for (const auto& m : j.at("methods")) p.methods.push_back(recon::parse_method(m.get<std::string>()));
    }
    if (j.contains("phase_modes")) {
      p.phase_modes.clear();
      for (const auto& m : j.at("phase_modes")) p.phase_modes.push_back(recon::parse_phase_mode(m.get<std::string>()));
    }
    if (j.contains("solver")) p.solver = recon::solver_config_from_json(j.at("solver"));
    p.lambda_rel = j.value("lambda_rel", p.lambda_rel);
    p.select_lambda = j.value("select_lambda", p.select_lambda);
    p.rank = j.value("rank", p.rank);
    p.estimate_coils = j.value("estimate_coils", p.estimate_coils);
    p.aha_reference_angle = j.value("aha_reference_angle", p.aha_reference_angle);
    if (j.contains("output_dir")) p.output_dir = j.at("output_dir").get<std::string>();
    p.write_arrays = j.value("write_arrays", p.write_arrays);
    p.write_previews = j.value("write_previews", p.write_previews);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed experiment plan: ") + e.what());
  }
  p.validate();
  return p;
}

std::vector<phantom::PhantomConfig> cohort_configs(const ExperimentPlan& plan) {
  std::vector<phantom::PhantomConfig> out;
  for (std::size_t i = 0; i < plan.n_subjects; ++i) {
    phantom::PhantomConfig c = plan.base;
    std::mt19937_64 rng(derive_seed(plan.master_seed, i, kJitter));
    auto uni = [&](double half) { return std::uniform_real_distribution<double>(-half, half)(rng); };
    c.ha_endo = std::max(1.0, c.ha_endo + uni(plan.jitter.ha_deg));
    c.ha_epi = std::min(-1.0, c.ha_epi + uni(plan.jitter.ha_deg));
    c.md_true *= 1.0 + uni(plan.jitter.md_frac);
    const double dx = uni(plan.jitter.geometry_vox), dy = uni(plan.jitter.geometry_vox);
    const double de = uni(plan.jitter.geometry_vox), dp = uni(plan.jitter.geometry_vox);
    const auto centers = c.centers();
    c.lv_center.clear();
    for (const auto& ctr : centers) c.lv_center.push_back({ctr.x + dx, ctr.y + dy});
    c.r_endo = std::max(2.0, c.r_endo + de);
    c.r_epi = std::max(c.r_endo + 4.0, c.r_epi + dp);
    // Shrink the wall if the jittered annulus no longer fits the grid.
    const double room = std::min({c.lv_center.front().x, c.lv_center.front().y,
                                  static_cast<double>(c.grid.nx - 1) - c.lv_center.front().x,
                                  static_cast<double>(c.grid.ny - 1) - c.lv_center.front().y});
    c.r_epi = std::min(c.r_epi, room);
    c.seed = derive_seed(plan.master_seed, i, kPhantom);
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

Analysis analyze_tensors(dti::TensorField tensors, std::span<const std::uint8_t> mask, double aha_reference_angle) {
  Analysis a;
  a.tensors = std::move(tensors);
  const Dims3 dims = a.tensors.dims;
  const auto centers = dti::mask_centroids(mask, dims);
  auto ha = dti::helix_angle(a.tensors, centers);
  for (const auto& w : ha.warnings) spdlog::debug("{}", w);
  a.ha = std::move(ha.degrees);
  a.hat = dti::compute_hat(a.ha, mask, dims, centers);
  a.md = dti::mean_diffusivity(a.tensors);
  a.fa = dti::fractional_anisotropy(a.tensors);
  a.segmentation = dti::segment_aha16(mask, dims, centers, aha_reference_angle);
  a.regional_hat = dti::regional_hat(a.hat, a.segmentation);
  a.regional_md = dti::regional_mean(a.md, a.segmentation);
  a.global_hat = a.hat.global;
  a.global_md = dti::masked_mean(a.md, mask);
  return a;
}

Analysis analyze(const CMatrix& image, const Dims3& dims, const std::vector<ColumnLabel>& labels,
                 std::span<const std::uint8_t> mask, double aha_reference_angle) {
  const CasoratiSeries magnitude(image.cwiseAbs().cast<cplx>(), dims, labels);
  return analyze_tensors(dti::fit_tensors(magnitude, mask), mask, aha_reference_angle);
}

json analysis_json(const Analysis& a) {
  auto regional = [](const std::array<dti::SegmentStat, 16>& s) {
    json out = json::array();
    for (const auto& seg : s) out.push_back({{"segment", seg.segment}, {"mean", seg.mean}, {"std", seg.stddev}, {"n", seg.n}});
    return out;
  };
  json per_slice = json::array();
  for (double v : a.hat.per_slice) per_slice.push_back(std::isfinite(v) ? json(v) : json(nullptr));
  return {{"global_hat", a.global_hat},
          {"global_md", a.global_md},
          {"hat_per_slice", per_slice},
          {"skipped_rays", a.hat.skipped_rays},
          {"clamped_eigenvalues", a.tensors.clamped_eigenvalues},
          {"regional_hat", regional(a.regional_hat)},
          {"regional_md", regional(a.regional_md)}};
}

void write_analysis(const std::filesystem::path& dir, const Analysis& a, const Dims3& dims, bool arrays, bool previews) {
  std::filesystem::create_directories(dir);
  write_json(dir / "metrics.json", analysis_json(a));
  {
    auto out = open_csv(dir / "hat_rays.csv");
    out << "slice,ray,slope,r2\n";
    for (const auto& r : a.hat.rays) out << r.slice << ',' << r.ray << ',' << r.slope << ',' << r.r2 << '\n';
  }
  write_segments_csv(dir / "segments_hat.csv", a.regional_hat);
  write_segments_csv(dir / "segments_md.csv", a.regional_md);
  if (arrays) {
    write_container(dir / "tensors", dti::to_container(a.tensors));
    write_container(dir / "ha_map", volume_container("HelixAngleMap", dims, a.ha));
    write_container(dir / "md_map", volume_container("MeanDiffusivityMap", dims, a.md));
    write_container(dir / "fa_map", volume_container("FractionalAnisotropyMap", dims, a.fa));
  }
  if (previews) {
    dti::write_pgm(dir / "ha.pgm", a.ha, dims, 180.0, 0.0);
    dti::write_pgm(dir / "md.pgm", a.md, dims, 3.0e-3, 1.5e-3);
    dti::write_pgm(dir / "fa.pgm", a.fa, dims, 1.0, 0.5);
  }
}

namespace {

struct SubjectOutput {
  SubjectReference reference;
  std::vector<CellResult> cells;
};

SubjectOutput run_subject(const ExperimentPlan& plan, std::size_t index, const phantom::PhantomConfig& cfg) {
  const auto dir = plan.output_dir / subject_tag(index);
  std::filesystem::create_directories(dir);
  const phantom::GroundTruth gt = phantom::build_phantom(cfg);
  const auto& labels = gt.clean_series.labels();
  const Dims3 dims = cfg.grid;
  const auto& mask = gt.myocardium_mask;
  if (plan.write_arrays) phantom::write_ground_truth(dir / "truth", gt);
  write_json(dir / "truth.json", {{"hat_global", gt.hat_global}, {"config", phantom::to_json(cfg)}});

  const encoding::KSpaceData full = phantom::acquire(gt, derive_seed(plan.master_seed, index, kNoise));
  CoilMaps coils = gt.coils;
  if (plan.estimate_coils) {
    const auto b0 = std::find_if(labels.begin(), labels.end(), [](const ColumnLabel& l) { return l.is_b0(); });
    const auto est = encoding::estimate_coil_maps(encoding::coil_images(full)[static_cast<std::size_t>(b0 - labels.begin())], dims);
    for (const auto& w : est.warnings) spdlog::warn("{}: {}", subject_tag(index), w);
    coils = est.maps;
  }
  const encoding::EncodingModel full_model{coils, full.mask, std::nullopt};

  recon::SolverConfig ls = plan.solver;
  ls.lambda = 0.0;
  ls.method = recon::Method::CsOnly;
  const recon::ReconResult least_squares = recon::reconstruct_cs_only(full, full_model, ls);

  std::size_t rank = plan.rank;
  if (rank == 0) rank = noise_edge_rank(least_squares.image);

  double lambda = plan.solver.lambda;
  if (lambda == 0.0) {
    if (plan.select_lambda) {
      lambda = recon::select_lambda(full, full_model, recon::default_lambda_grid(full, full_model, plan.solver.wavelet_levels),
                                    ls)
                   .lambda;
    } else {
      const transforms::Wavelet3D psi(transforms::WaveletSpec::make(dims, plan.solver.wavelet_levels));
      lambda = plan.lambda_rel * psi.forward(encoding::adjoint_data(full_model, full)).cwiseAbs().maxCoeff();
    }
  }
  recon::SolverConfig solver = plan.solver;
  solver.lambda = lambda;
  solver.rank = rank;

  // The reference is the proposed reconstruction of the fully sampled data.
  recon::SolverConfig ref_cfg = solver;
  ref_cfg.method = recon::Method::Lrcs;
  ref_cfg.phase_mode = recon::PhaseMode::Proposed;
  const recon::ReconResult reference = recon::reconstruct(full, full_model, ref_cfg);
  const Analysis ref = analyze(reference.image, dims, labels, mask, plan.aha_reference_angle);
  const Analysis truth = analyze(gt.clean_series.data(), dims, labels, mask, plan.aha_reference_angle);
  write_analysis(dir / "reference", ref, dims, plan.write_arrays, plan.write_previews);
  {
    json report = reference.report.to_json();
    report["solver"] = recon::to_json(ref_cfg);
    write_json(dir / "reference" / "report.json", report);
  }

  SubjectOutput out;
  out.reference = {ref.global_hat, ref.global_md, truth.global_hat, truth.global_md,
                   segment_means(ref.regional_hat), segment_means(ref.regional_md)};
  spdlog::info("{}: rank {}, lambda {:.4e}, reference HAT {:.4f} deg/%TD, MD {:.4e} mm^2/s", subject_tag(index), rank,
               lambda, ref.global_hat, ref.global_md);

  const bool need_lattice =
      std::find(plan.phase_modes.begin(), plan.phase_modes.end(), recon::PhaseMode::LowRes) != plan.phase_modes.end();
  const bool need_proposed = std::any_of(plan.phase_modes.begin(), plan.phase_modes.end(),
                                         [](recon::PhaseMode m) { return m != recon::PhaseMode::LowRes; });

  for (double r : plan.r_list) {
    const auto mask_seed = derive_seed(plan.master_seed, index, kMask + static_cast<std::uint64_t>(std::llround(r * 1000.0)));
    struct Variant {
      encoding::KSpaceData data;
      encoding::EncodingModel model;
      std::optional<recon::ReconResult> cs;
      std::string error;
    };
    std::map<encoding::MaskScheme, Variant> variants;
    for (auto scheme : {encoding::MaskScheme::Proposed, encoding::MaskScheme::LowResLattice}) {
      if ((scheme == encoding::MaskScheme::Proposed && !need_proposed) ||
          (scheme == encoding::MaskScheme::LowResLattice && !need_lattice))
        continue;
      Variant v;
      try {
        const SamplingMask m = encoding::make_mask(scheme, dims.ny, dims.nz, labels, r, mask_seed);
        v.data = encoding::undersample(full, m);
        v.model = {coils, m, std::nullopt};
      } catch (const Error& e) {
        v.error = e.what();
      }
      variants.emplace(scheme, std::move(v));
    }

    for (auto& [scheme, v] : variants) {
      if (!v.error.empty()) continue;
      try {
        recon::SolverConfig c = solver;
        c.method = recon::Method::CsOnly;
        v.cs = recon::reconstruct_cs_only(v.data, v.model, c);
      } catch (const Error& e) {
        v.error = e.what();
      }
    }

    for (auto method : plan.methods)
      for (auto phase : plan.phase_modes) {
        CellResult cell;
        cell.subject = index;
        cell.r = r;
        cell.method = method;
        cell.phase_mode = phase;
        cell.hat_ref = ref.global_hat;
        cell.md_ref = ref.global_md;
        cell.lambda = lambda;
        cell.regional_hat.fill(kNaN);
        cell.regional_md.fill(kNaN);
        cell.regional_hat_ref = out.reference.regional_hat;
        cell.regional_md_ref = out.reference.regional_md;
        const auto cell_dir = dir / r_tag(r) / recon::method_name(method) / recon::phase_mode_name(phase);
        try {
          const auto& v = variants.at(phase == recon::PhaseMode::LowRes ? encoding::MaskScheme::LowResLattice
                                                                         : encoding::MaskScheme::Proposed);
          if (!v.cs) throw ValidationError(v.error);
          recon::ReconResult result;
          if (method == recon::Method::CsOnly) {
            result = *v.cs;
          } else {
            recon::SolverConfig c = solver;
            c.method = method;
            c.phase_mode = phase;
            result = recon::reconstruct(v.data, v.model, c, &*v.cs);
          }
          cell.rank = result.report.rank;
          cell.cg_iters = result.report.total_cg_iters;
          cell.wall_seconds = result.report.wall_seconds;
          const Analysis a = analyze(result.image, dims, labels, mask, plan.aha_reference_angle);
          cell.hat = a.global_hat;
          cell.md = a.global_md;
          cell.hat_bias = safe_bias(cell.hat_ref, cell.hat);
          cell.md_bias = safe_bias(cell.md_ref, cell.md);
          cell.nrmse = masked_nrmse(result.image, reference.image, mask);
          cell.regional_hat = segment_means(a.regional_hat);
          cell.regional_md = segment_means(a.regional_md);
          cell.ok = true;
          write_analysis(cell_dir, a, dims, plan.write_arrays, plan.write_previews);
          json report = result.report.to_json();
          report["R_nominal"] = r;
          report["R_measured"] = v.data.mask.r_measured();
          report["solver"] = recon::to_json(solver);
          write_json(cell_dir / "report.json", report);
          if (plan.write_arrays) write_container(cell_dir / "series", to_container(result.series(labels)));
          spdlog::info("{} {} {}/{}: HAT {:.4f} (bias {:.3f}), MD {:.4e} (bias {:.3f})", subject_tag(index), r_tag(r),
                       recon::method_name(method), recon::phase_mode_name(phase), cell.hat, cell.hat_bias, cell.md,
                       cell.md_bias);
        } catch (const Error& e) {
          cell.ok = false;
          cell.error = e.what();
          spdlog::error("{} {} {}/{} failed: {}", subject_tag(index), r_tag(r), recon::method_name(method),
                        recon::phase_mode_name(phase), e.what());
        }
        out.cells.push_back(std::move(cell));
      }
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  std::filesystem::create_directories(plan.output_dir);
  write_json(plan.output_dir / "plan.json", to_json(plan));
  const auto configs = cohort_configs(plan);

  std::vector<SubjectOutput> outputs(configs.size());
  std::vector<std::string> failures(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) {
    try {
      outputs[i] = run_subject(plan, i, configs[i]);
    } catch (const Error& e) {
      failures[i] = e.what();
      spdlog::error("{} failed: {}", subject_tag(i), e.what());
    }
  });

  ExperimentReport report;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    report.references.push_back(outputs[i].reference);
    if (!failures[i].empty()) {
      // The subject never reached its cells; record every one as failed.
      for (double r : plan.r_list)
        for (auto m : plan.methods)
          for (auto p : plan.phase_modes) {
            CellResult c;
            c.subject = i;
            c.r = r;
            c.method = m;
            c.phase_mode = p;
            c.error = failures[i];
            c.regional_hat.fill(kNaN);
            c.regional_md.fill(kNaN);
            c.regional_hat_ref.fill(kNaN);
            c.regional_md_ref.fill(kNaN);
            report.cells.push_back(c);
          }
      continue;
    }
    for (auto& c : outputs[i].cells) report.cells.push_back(std::move(c));
  }
  write_cells_csv(plan.output_dir / "cells.csv", report.cells);
  report.stats = evaluate(report.cells, plan.output_dir);
  write_stats_csv(plan.output_dir / "stats.csv", report.stats);
  return report;
}

void write_cells_csv(const std::filesystem::path& path, const std::vector<CellResult>& cells) {
  auto out = open_csv(path);
  out << "subject,R,method,phase_mode,status,hat,md,hat_ref,md_ref,hat_bias,md_bias,nrmse,rank,lambda,cg_iters";
  for (int s = 1; s <= 16; ++s) out << ",hat_seg" << s;
  for (int s = 1; s <= 16; ++s) out << ",md_seg" << s;
  for (int s = 1; s <= 16; ++s) out << ",hat_ref_seg" << s;
  for (int s = 1; s <= 16; ++s) out << ",md_ref_seg" << s;
  out << ",error\n";
  for (const auto& c : cells) {
    out << c.subject + 1 << ',' << c.r << ',' << recon::method_name(c.method) << ','
        << recon::phase_mode_name(c.phase_mode) << ',' << (c.ok ? "ok" : "failed") << ',' << c.hat << ',' << c.md << ','
        << c.hat_ref << ',' << c.md_ref << ',' << c.hat_bias << ',' << c.md_bias << ',' << c.nrmse << ',' << c.rank << ','
        << c.lambda << ',' << c.cg_iters;
    for (double v : c.regional_hat) out << ',' << v;
    for (double v : c.regional_md) out << ',' << v;
    for (double v : c.regional_hat_ref) out << ',' << v;
    for (double v : c.regional_md_ref) out << ',' << v;
    out << ',' << sanitize(c.error) << '\n';
  }
}

std::vector<CellResult> read_cells_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  constexpr std::size_t kColumns = 15 + 64 + 1;
  if (header.size() != kColumns || header[0] != "subject")
    throw FormatError(path.string() + ": not a cells table (unexpected header)");
  std::vector<CellResult> cells;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != kColumns) throw FormatError(path.string() + ": row " + std::to_string(row) + " has the wrong field count");
    try {
      CellResult c;
      c.subject = std::stoul(f[0]) - 1;
      c.r = std::stod(f[1]);
      c.method = recon::parse_method(f[2]);
      c.phase_mode = recon::parse_phase_mode(f[3]);
      c.ok = f[4] == "ok";
      c.hat = std::stod(f[5]);
      c.md = std::stod(f[6]);
      c.hat_ref = std::stod(f[7]);
      c.md_ref = std::stod(f[8]);
      c.hat_bias = std::stod(f[9]);
      c.md_bias = std::stod(f[10]);
      c.nrmse = std::stod(f[11]);
      c.rank = std::stoul(f[12]);
      c.lambda = std::stod(f[13]);
      c.cg_iters = std::stoi(f[14]);
      for (std::size_t s = 0; s < 16; ++s) {
        c.regional_hat[s] = std::stod(f[15 + s]);
        c.regional_md[s] = std::stod(f[31 + s]);
        c.regional_hat_ref[s] = std::stod(f[47 + s]);
        c.regional_md_ref[s] = std::stod(f[63 + s]);
      }
      c.error = f[79];
      cells.push_back(std::move(c));
    } catch (const std::logic_error& e) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return cells;
}

void write_stats_csv(const std::filesystem::path& path, const std::vector<StatRow>& rows) {
  auto out = open_csv(path);
  out << "R,method,phase_mode,metric,n,bias_mean,bias_std,icc,icc_lower,icc_upper,band,p\n";
  for (const auto& s : rows)
    out << s.r << ',' << recon::method_name(s.method) << ',' << recon::phase_mode_name(s.phase_mode) << ',' << s.metric
        << ',' << s.n << ',' << s.bias.mean << ',' << s.bias.stddev << ',' << s.icc.r << ',' << s.icc.lower << ','
        << s.icc.upper << ',' << s.icc.band << ',' << s.wilcoxon.p << '\n';
}

std::vector<StatRow> evaluate(const std::vector<CellResult>& cells, const std::filesystem::path& pmap_dir) {
  using Key = std::tuple<double, recon::Method, recon::PhaseMode>;
  std::map<Key, std::vector<const CellResult*>> groups;
  for (const auto& c : cells)
    if (c.ok) groups[{c.r, c.method, c.phase_mode}].push_back(&c);

  std::vector<StatRow> rows;
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(), [](const CellResult* a, const CellResult* b) { return a->subject < b->subject; });
    for (const std::string metric : {"HAT", "MD"}) {
      const bool hat = metric == "HAT";
      std::vector<double> ref, rec;
      std::vector<std::array<double, 16>> ref_seg, rec_seg;
      for (const auto* c : group) {
        ref.push_back(hat ? c->hat_ref : c->md_ref);
        rec.push_back(hat ? c->hat : c->md);
        rec_seg.push_back(hat ? c->regional_hat : c->regional_md);
        ref_seg.push_back(hat ? c->regional_hat_ref : c->regional_md_ref);
      }
      StatRow row;
      std::tie(row.r, row.method, row.phase_mode) = key;
      row.metric = metric;
      row.n = group.size();
      try {
        row.bias = stats::bias_summary(ref, rec);
      } catch (const ValidationError& e) {
        spdlog::warn("bias for {} skipped: {}", metric, e.what());
      }
      if (row.n >= 3) {
        row.icc = stats::icc_absolute_agreement(ref, rec);
      } else {
        row.icc.defined = false;
        row.icc.r = row.icc.lower = row.icc.upper = kNaN;
        row.icc.band = "Undefined";
      }
      row.wilcoxon = stats::wilcoxon_signed_rank(ref, rec);
      rows.push_back(row);
      if (pmap_dir.empty()) continue;
      try {
        const auto pmap = stats::regional_pmap(ref_seg, rec_seg);
        std::ostringstream name;
        name << "pmap_" << metric << '_' << r_tag(row.r) << '_' << recon::method_name(row.method) << '_'
             << recon::phase_mode_name(row.phase_mode) << ".csv";
        stats::write_pmap_csv(pmap_dir / name.str(), pmap);
      } catch (const ValidationError& e) {
        spdlog::warn("p-map for {} at {} skipped: {}", metric, r_tag(row.r), e.what());
      }
    }
  }
  return rows;
}

}  // namespace lrcs::pipeline
