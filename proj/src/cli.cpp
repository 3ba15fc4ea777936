#include "lrcs/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lrcs/container.hpp"
#include "lrcs/dti.hpp"
#include "lrcs/encoding.hpp"
#include "lrcs/phantom.hpp"
#include "lrcs/pipeline.hpp"
#include "lrcs/recon.hpp"
#include "lrcs/threading.hpp"

namespace lrcs::cli {

namespace fs = std::filesystem;

namespace {

// JSON config files for CLI11: scalars map to one input, arrays to several,
// and nested objects to subcommand sections.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& r = opt->results();
        j[name] = r.size() == 1 ? json(r.front()) : json(r);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ParseError(std::string("config file is not valid JSON: ") + e.what(), CLI::ExitCodes::ConversionError);
    }
    if (!j.is_object()) throw CLI::ParseError("config file must hold a JSON object", CLI::ExitCodes::ConversionError);
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        flatten(value, next, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(value));
      out.push_back(std::move(item));
    }
  }
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Container load(const fs::path& dir) {
  if (!fs::exists(dir)) throw IoError("missing input " + dir.string());
  return read_container(dir);
}

std::vector<std::uint8_t> load_roi(const fs::path& dir, const Dims3& dims) {
  const Container c = load(dir);
  auto values = c.at("values").to_bool();
  if (values.size() != dims.voxels()) throw ValidationError(dir.string() + ": region mask does not match the image grid");
  return values;
}

std::vector<ColumnLabel> load_labels(const fs::path& path) {
  const json j = read_json_file(path);
  try {
    return labels_from_json(j.is_object() ? j.at("labels") : j);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

struct Globals {
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::string log_level = "info";
};

struct PhantomArgs {
  fs::path config;
  fs::path out;
};

struct SampleArgs {
  fs::path kspace;
  fs::path labels;
  double r = 4.0;
  std::string scheme = "proposed";
  fs::path out;
};

struct ReconArgs {
  fs::path kspace, coils, mask, labels, out;
  std::string method = "lrcs";
  std::string phase = "proposed";
  std::size_t rank = 0;
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  int iters = 25;
  int cg_iters = 15;
  double tol = 1e-9;
  double cg_tol = 1e-8;
  double alpha_decay = 1.55;
  int wavelet_levels = 4;
  bool single_precision = false;
  std::optional<fs::path> dump_dir;
};

struct AnalysisArgs {
  fs::path input;
  fs::path roi;
  fs::path out;
  double aha_reference = 0.0;
  bool previews = true;
};

struct EvalArgs {
  fs::path cells;
  fs::path out;
};

struct RunArgs {
  fs::path plan;
  std::optional<fs::path> out;
};

void cmd_phantom(const PhantomArgs& a, const Globals& g) {
  phantom::PhantomConfig cfg = phantom::config_from_json(read_json_file(a.config));
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  const phantom::GroundTruth gt = phantom::build_phantom(cfg);
  fs::create_directories(a.out);
  phantom::write_ground_truth(a.out / "truth", gt);
  // Noise uses its own stream so the anatomy does not depend on it.
  const encoding::KSpaceData data = phantom::acquire(gt, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  write_container(a.out / "kspace", encoding::to_container(data));
  write_container(a.out / "coils", to_container(gt.coils));
  write_json_file(a.out / "labels.json", {{"labels", labels_to_json(gt.clean_series.labels())}});
  spdlog::info("phantom written to {} (HAT {:.4f} deg/%TD)", a.out.string(), gt.hat_global);
}

void cmd_sample(const SampleArgs& a, const Globals& g) {
  const encoding::KSpaceData full = encoding::kspace_from_container(load(a.kspace));
  const auto labels = load_labels(a.labels);
  if (labels.size() != full.mask.columns())
    throw ValidationError(a.labels.string() + ": label count does not match the k-space columns");
  const SamplingMask mask = encoding::make_mask(encoding::parse_scheme(a.scheme), full.dims.ny, full.dims.nz, labels, a.r,
                                                g.seed.value_or(1));
  write_container(a.out, to_container(mask));
  spdlog::info("mask R={} ({}): measured R {:.4f}, true R {:.4f}", a.r, a.scheme, mask.r_measured(),
               r_true(a.r, 1, labels.size() - 1));
}

void cmd_recon(const ReconArgs& a, const Globals& g) {
  encoding::KSpaceData data = encoding::kspace_from_container(load(a.kspace));
  const CoilMaps coils = coils_from_container(load(a.coils));
  const SamplingMask mask = mask_from_container(load(a.mask));
  const auto labels = load_labels(a.labels);
  if (data.mask.raw() != mask.raw()) data = encoding::undersample(data, mask);
  const encoding::EncodingModel model{coils, mask, std::nullopt};

  recon::SolverConfig cfg;
  cfg.method = recon::parse_method(a.method);
  cfg.phase_mode = recon::parse_phase_mode(a.phase);
  cfg.rank = a.rank;
  cfg.lambda = a.lambda;
  cfg.max_iters = a.iters;
  cfg.cg_max_iters = a.cg_iters;
  cfg.tol = a.tol;
  cfg.cg_tol = a.cg_tol;
  cfg.alpha_decay = a.alpha_decay;
  cfg.wavelet_levels = a.wavelet_levels;
  cfg.dump_dir = a.dump_dir;
  json selection;
  if (!a.lambda_grid.empty()) {
    const auto sel = recon::select_lambda(data, model, a.lambda_grid, cfg);
    cfg.lambda = sel.lambda;
    selection = {{"candidates", sel.candidates}, {"nuclear_norms", sel.nuclear_norms}, {"selected", sel.lambda}};
  } else if (cfg.method != recon::Method::LrOnly && cfg.lambda == 0.0) {
    const auto grid = recon::default_lambda_grid(data, model, cfg.wavelet_levels);
    cfg.lambda = grid[1];
    spdlog::info("no lambda given; using {:.4e} (1e-2 of max |Psi A^* d|)", cfg.lambda);
  }
  cfg.validate();

  const recon::ReconResult result = recon::reconstruct(data, model, cfg);
  fs::create_directories(a.out);
  write_container(a.out / "series", to_container(result.series(labels), a.single_precision));
  if (cfg.method != recon::Method::CsOnly && result.phase.values().size() > 0)
    write_container(a.out / "phase", to_container(result.phase, result.dims));
  json report = result.report.to_json();
  report["solver"] = recon::to_json(cfg);
  report["R_measured"] = mask.r_measured();
  if (g.seed) report["seed"] = *g.seed;
  if (!selection.is_null()) report["lambda_selection"] = selection;
  write_json_file(a.out / "report.json", report);
  spdlog::info("recon {}/{} finished: {} ({} CG iterations)", a.method, a.phase, result.report.stop_reason,
               result.report.total_cg_iters);
}

void cmd_fit(const AnalysisArgs& a) {
  const CasoratiSeries series = casorati_from_container(load(a.input));
  const auto roi = load_roi(a.roi, series.dims());
  const CasoratiSeries magnitude = series.with_data(series.data().cwiseAbs().cast<cplx>());
  const dti::TensorField field = dti::fit_tensors(magnitude, roi);
  fs::create_directories(a.out);
  write_container(a.out / "tensors", dti::to_container(field));
  const auto md = dti::mean_diffusivity(field);
  const auto fa = dti::fractional_anisotropy(field);
  write_container(a.out / "md_map", volume_container("MeanDiffusivityMap", series.dims(), md));
  write_container(a.out / "fa_map", volume_container("FractionalAnisotropyMap", series.dims(), fa));
  if (a.previews) {
    dti::write_pgm(a.out / "md.pgm", md, series.dims(), 3.0e-3, 1.5e-3);
    dti::write_pgm(a.out / "fa.pgm", fa, series.dims(), 1.0, 0.5);
  }
  if (field.clamped_eigenvalues) spdlog::warn("{} eigenvalues clamped to stay positive", field.clamped_eigenvalues);
}

void cmd_metrics(const AnalysisArgs& a) {
  dti::TensorField field = dti::tensors_from_container(load(a.input));
  const auto roi = load_roi(a.roi, field.dims);
  const Dims3 dims = field.dims;
  const pipeline::Analysis analysis = pipeline::analyze_tensors(std::move(field), roi, a.aha_reference);
  pipeline::write_analysis(a.out, analysis, dims, true, a.previews);
  spdlog::info("global HAT {:.4f} deg/%TD, MD {:.4e} mm^2/s", analysis.global_hat, analysis.global_md);
}

void cmd_eval(const EvalArgs& a) {
  const auto cells = pipeline::read_cells_csv(a.cells);
  fs::create_directories(a.out);
  const auto rows = pipeline::evaluate(cells, a.out);
  pipeline::write_stats_csv(a.out / "stats.csv", rows);
  spdlog::info("{} summary rows written to {}", rows.size(), (a.out / "stats.csv").string());
}

void cmd_run(const RunArgs& a, const Globals& g) {
  pipeline::ExperimentPlan plan = pipeline::plan_from_json(read_json_file(a.plan));
  if (a.out) plan.output_dir = *a.out;
  if (g.seed) plan.master_seed = *g.seed;
  plan.validate();
  const auto report = pipeline::run_experiment(plan);
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += c.ok ? 0 : 1;
  if (failed) spdlog::warn("{} of {} cells failed; see cells.csv", failed, report.cells.size());
  spdlog::info("experiment written to {}", plan.output_dir.string());
}

void configure_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_st("lrcs");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") throw ValidationError("unknown log level '" + level + "'");
  spdlog::set_level(lvl);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-corrected low-rank and group-sparse reconstruction of undersampled cardiac DTI"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values; command-line flags override it");
  app.require_subcommand(1);

  Globals g;
  app.add_option("--threads", g.threads, "worker threads (default: $LRCS_CDTI_THREADS or all cores)");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, critical or off")->capture_default_str();

  PhantomArgs pa;
  auto* phantom_cmd = app.add_subcommand("phantom", "simulate a phantom and its fully sampled k-space");
  phantom_cmd->add_option("config", pa.config, "phantom configuration JSON")->required();
  phantom_cmd->add_option("-o,--output", pa.out, "output directory")->required();

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "generate an undersampling mask");
  sample_cmd->add_option("--kspace", sa.kspace, "fully sampled k-space container")->required();
  sample_cmd->add_option("--labels", sa.labels, "column labels JSON")->required();
  sample_cmd->add_option("--R", sa.r, "nominal acceleration")->capture_default_str();
  sample_cmd->add_option("--scheme", sa.scheme, "proposed or lowres-lattice")->capture_default_str();
  sample_cmd->add_option("-o,--output", sa.out, "output mask container")->required();

  ReconArgs ra;
  auto* recon_cmd = app.add_subcommand("recon", "reconstruct an image series");
  recon_cmd->add_option("--kspace", ra.kspace, "k-space container (full or undersampled)")->required();
  recon_cmd->add_option("--coils", ra.coils, "coil map container")->required();
  recon_cmd->add_option("--mask", ra.mask, "sampling mask container")->required();
  recon_cmd->add_option("--labels", ra.labels, "column labels JSON")->required();
  recon_cmd->add_option("--method", ra.method, "cs, lr or lrcs")->capture_default_str();
  recon_cmd->add_option("--phase", ra.phase, "none, lowres or proposed")->capture_default_str();
  recon_cmd->add_option("--rank", ra.rank, "subspace rank, 0 picks it from the singular values")->capture_default_str();
  auto* lambda_opt = recon_cmd->add_option("--lambda", ra.lambda, "regularization weight, 0 uses 1e-2 max|Psi A^* d|");
  recon_cmd->add_option("--lambda-grid", ra.lambda_grid, "candidate lambdas for nuclear-norm selection")->excludes(lambda_opt);
  recon_cmd->add_option("--iters", ra.iters, "maximum ADMM iterations")->capture_default_str();
  recon_cmd->add_option("--cg-iters", ra.cg_iters, "maximum CG iterations per solve")->capture_default_str();
  recon_cmd->add_option("--tol", ra.tol, "ADMM stopping tolerance on ||dU||")->capture_default_str();
  recon_cmd->add_option("--cg-tol", ra.cg_tol, "CG relative residual tolerance")->capture_default_str();
  recon_cmd->add_option("--alpha-decay", ra.alpha_decay, "threshold decay per iteration")->capture_default_str();
  recon_cmd->add_option("--wavelet-levels", ra.wavelet_levels, "wavelet decomposition levels")->capture_default_str();
  recon_cmd->add_flag("--single-precision", ra.single_precision, "store the series as complex64");
  recon_cmd->add_option("--dump-dir", ra.dump_dir, "where to dump the iterate on numerical failure");
  recon_cmd->add_option("-o,--output", ra.out, "output directory")->required();

  AnalysisArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "fit diffusion tensors to a reconstructed series");
  fit_cmd->add_option("--series", fa.input, "image series container")->required();
  fit_cmd->add_option("--roi", fa.roi, "region mask container")->required();
  fit_cmd->add_option("-o,--output", fa.out, "output directory")->required();
  fit_cmd->add_option("--previews", fa.previews, "write PGM previews")->capture_default_str();

  AnalysisArgs ma;
  auto* metrics_cmd = app.add_subcommand("metrics", "helix angle, HAT, MD and AHA-16 summaries");
  metrics_cmd->add_option("--tensors", ma.input, "tensor field container")->required();
  metrics_cmd->add_option("--roi", ma.roi, "region mask container")->required();
  metrics_cmd->add_option("--aha-reference", ma.aha_reference, "AHA reference angle in radians")->capture_default_str();
  metrics_cmd->add_option("-o,--output", ma.out, "output directory")->required();
  metrics_cmd->add_option("--previews", ma.previews, "write PGM previews")->capture_default_str();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "bias, ICC and Wilcoxon summaries from a cells table");
  eval_cmd->add_option("--cells", ea.cells, "cells.csv from an experiment")->required();
  eval_cmd->add_option("-o,--output", ea.out, "output directory")->required();

  RunArgs rna;
  auto* run_cmd = app.add_subcommand("run", "run a full experiment plan");
  run_cmd->add_option("plan", rna.plan, "experiment plan JSON")->required();
  run_cmd->add_option("-o,--output", rna.out, "output directory (overrides the plan)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    configure_logging(g.log_level);
    if (g.threads) {
      if (*g.threads == 0) throw ValidationError("--threads must be positive");
      set_thread_count(*g.threads);
    }
    if (*phantom_cmd) cmd_phantom(pa, g);
    else if (*sample_cmd) cmd_sample(sa, g);
    else if (*recon_cmd) cmd_recon(ra, g);
    else if (*fit_cmd) cmd_fit(fa);
    else if (*metrics_cmd) cmd_metrics(ma);
    else if (*eval_cmd) cmd_eval(ea);
    else if (*run_cmd) cmd_run(rna, g);
  } catch (const ValidationError& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure [" << stage << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lrcs::cli
