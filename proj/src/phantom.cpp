#include "lrcs/phantom.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace lrcs::phantom {

namespace {

constexpr double kRad = std::numbers::pi / 180.0;

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
  return std::mt19937_64(seq);
}

double snr_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ValidationError("snr must be a number or \"inf\"");
  }
  return j.get<double>();
}

}  // namespace

const std::vector<Vec3>& default_directions() {
  static const std::vector<Vec3> dirs = {
      {0.144774371707380, 0.688886747924967, 0.710264337996845},
      {-0.373454028838967, -0.623762384330393, 0.686624042863638},
      {0.201616844950326, -0.963289999450921, 0.177265407765084},
      {0.318599575883744, 0.055338333601264, 0.946272676917670},
      {0.856640044150345, -0.444449156324054, 0.261978591111815},
      {0.832396764363459, 0.260195004480694, 0.489299689679582},
      {-0.397696391727697, 0.080881772264922, 0.913945139995862},
      {0.435785687175495, 0.893757467561525, 0.106246995397477},
      {-0.872222319828371, -0.445082804678391, 0.202804146340337},
      {0.340367107192153, -0.577362961707662, 0.742160523599714},
      {-0.492628535143284, 0.758419503098193, 0.426751665120209},
      {-0.893990068384565, 0.187618484385484, 0.406916529458628},
  };
  return dirs;
}

std::vector<dti::Center> PhantomConfig::centers() const {
  if (!lv_center.empty()) return lv_center;
  return std::vector<dti::Center>(grid.nz, dti::Center{static_cast<double>(grid.nx / 2), static_cast<double>(grid.ny / 2)});
}

std::vector<ColumnLabel> PhantomConfig::labels() const {
  std::size_t n_b0 = 0;
  double b = 0.0;
  for (double v : b_values) {
    if (v == 0.0)
      ++n_b0;
    else if (b != 0.0 && v != b)
      throw ValidationError("phantom supports a single non-zero b-shell");
    else
      b = v;
  }
  return make_column_labels(n_b0, b, directions);
}

void PhantomConfig::validate() const {
  if (grid.nx == 0 || grid.ny == 0 || grid.nz == 0) throw ValidationError("phantom grid has a zero axis");
  if (!(r_endo > 0.0 && r_endo < r_epi && r_epi < 0.5 * static_cast<double>(std::min(grid.nx, grid.ny))))
    throw ValidationError("phantom radii must satisfy 0 < r_endo < r_epi < min(nx, ny)/2");
  if (!(ha_endo > 0.0 && ha_epi < 0.0)) throw ValidationError("phantom requires ha_endo > 0 and ha_epi < 0");
  if (!(md_true > 0.0)) throw ValidationError("phantom md_true must be positive");
  if (!(fa_true >= 0.0 && fa_true < 1.0)) throw ValidationError("phantom fa_true must lie in [0, 1)");
  if (directions.size() < 6) throw ValidationError("phantom needs at least 6 diffusion directions");
  if (n_coils == 0) throw ValidationError("phantom needs at least one coil");
  if (!(snr > 0.0)) throw ValidationError("phantom snr must be positive");
  if (phase_order < 0) throw ValidationError("phantom phase_order must be >= 0");
  if (!lv_center.empty() && lv_center.size() != grid.nz) throw ValidationError("lv_center needs one entry per slice");
  for (const auto& c : centers())
    if (c.x - r_epi < 0.0 || c.y - r_epi < 0.0 || c.x + r_epi > static_cast<double>(grid.nx - 1) ||
        c.y + r_epi > static_cast<double>(grid.ny - 1))
      throw ValidationError("phantom annulus does not fit inside the grid");
  std::size_t n_b0 = 0;
  for (double b : b_values) n_b0 += b == 0.0 ? 1 : 0;
  if (n_b0 == 0) throw ValidationError("phantom needs a b=0 column");
  (void)labels();
}

json to_json(const PhantomConfig& cfg) {
  json centers = json::array();
  for (const auto& c : cfg.lv_center) centers.push_back({c.x, c.y});
  json dirs = json::array();
  for (const auto& d : cfg.directions) dirs.push_back({d.x(), d.y(), d.z()});
  json snr = std::isinf(cfg.snr) ? json("inf") : json(cfg.snr);
  return {{"grid", {cfg.grid.nx, cfg.grid.ny, cfg.grid.nz}},
          {"lv_center", centers},
          {"r_endo", cfg.r_endo},
          {"r_epi", cfg.r_epi},
          {"ha_endo", cfg.ha_endo},
          {"ha_epi", cfg.ha_epi},
          {"md_true", cfg.md_true},
          {"fa_true", cfg.fa_true},
          {"b_values", cfg.b_values},
          {"directions", dirs},
          {"n_coils", cfg.n_coils},
          {"snr", snr},
          {"phase_order", cfg.phase_order},
          {"phase_amplitude", cfg.phase_amplitude},
          {"background", cfg.background},
          {"seed", cfg.seed}};
}

PhantomConfig config_from_json(const json& j) {
  PhantomConfig cfg;
  try {
    if (j.contains("grid")) {
      const auto g = j.at("grid").get<std::vector<std::size_t>>();
      if (g.size() != 3) throw ValidationError("phantom grid needs 3 entries");
      cfg.grid = {g[0], g[1], g[2]};
    }
    if (j.contains("lv_center"))
      for (const auto& c : j.at("lv_center")) cfg.lv_center.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    cfg.r_endo = j.value("r_endo", cfg.r_endo);
    cfg.r_epi = j.value("r_epi", cfg.r_epi);
    cfg.ha_endo = j.value("ha_endo", cfg.ha_endo);
    cfg.ha_epi = j.value("ha_epi", cfg.ha_epi);
    cfg.md_true = j.value("md_true", cfg.md_true);
    cfg.fa_true = j.value("fa_true", cfg.fa_true);
    if (j.contains("b_values")) cfg.b_values = j.at("b_values").get<std::vector<double>>();
    if (j.contains("directions")) {
      cfg.directions.clear();
      for (const auto& d : j.at("directions")) {
        Vec3 v(d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>());
        if (std::abs(v.norm() - 1.0) > 1e-12) v.normalize();  // keep unit input bit-exact
        cfg.directions.push_back(v);
      }
    }
    cfg.n_coils = j.value("n_coils", cfg.n_coils);
    if (j.contains("snr")) cfg.snr = snr_from_json(j.at("snr"));
    cfg.phase_order = j.value("phase_order", cfg.phase_order);
    cfg.phase_amplitude = j.value("phase_amplitude", cfg.phase_amplitude);
    cfg.background = j.value("background", cfg.background);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed phantom config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Vec3 eigenvalues_for(double md, double fa) {
  // l1 = md + 2 delta, l2 = l3 = md - delta solves FA(l) = fa exactly.
  const double delta = md * fa * std::sqrt(3.0 / (9.0 - 6.0 * fa * fa));
  return {md + 2.0 * delta, md - delta, md - delta};
}

CMatrix GroundTruth::phased_series() const { return phase.values().cwiseProduct(clean_series.data()); }

double GroundTruth::mean_s0() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < myocardium_mask.size(); ++j)
    if (myocardium_mask[j]) {
      sum += tensors.s0[j];
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

GroundTruth build_phantom(const PhantomConfig& cfg) {
  cfg.validate();
  const Dims3 d = cfg.grid;
  const std::size_t m = d.voxels();
  const auto labels = cfg.labels();
  const std::size_t n = labels.size();
  const auto centers = cfg.centers();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  GroundTruth gt;
  gt.config = cfg;
  gt.myocardium_mask.assign(m, 0);
  gt.ha_map.assign(m, nan);
  gt.td_map.assign(m, nan);
  gt.md_map.assign(m, nan);
  gt.hat_global = (cfg.ha_epi - cfg.ha_endo) / 100.0;

  const Vec3 ev = eigenvalues_for(cfg.md_true, cfg.fa_true);
  std::vector<dti::Tensor6> tensors(m, dti::Tensor6{});
  std::vector<double> s0(m, 0.0);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t j = d.index(x, y, z);
        const double rx = static_cast<double>(x) - centers[z].x, ry = static_cast<double>(y) - centers[z].y;
        const double r = std::hypot(rx, ry);
        if (r < cfg.r_endo || r > cfg.r_epi) continue;
        const double td = (r - cfg.r_endo) / (cfg.r_epi - cfg.r_endo);
        const double ha = cfg.ha_endo + (cfg.ha_epi - cfg.ha_endo) * td;
        const Vec3 radial(rx / r, ry / r, 0.0);
        const Vec3 longitudinal(0.0, 0.0, 1.0);
        const Vec3 circumferential = longitudinal.cross(radial);
        const Vec3 e1 = std::cos(ha * kRad) * circumferential + std::sin(ha * kRad) * longitudinal;
        const Eigen::Matrix3d dt = ev(1) * Eigen::Matrix3d::Identity() + (ev(0) - ev(1)) * e1 * e1.transpose();
        gt.myocardium_mask[j] = 1;
        gt.ha_map[j] = ha;
        gt.td_map[j] = td;
        gt.md_map[j] = cfg.md_true;
        tensors[j] = dti::from_matrix(dt);
        s0[j] = 1.0;
      }
  gt.tensors = dti::TensorField::from_tensors(d, gt.myocardium_mask, std::move(tensors), std::move(s0));

  CMatrix clean(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < n; ++k)
      clean(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          gt.myocardium_mask[j] ? dti::signal(gt.tensors.tensors[j], gt.tensors.s0[j], labels[k]) : cfg.background;
  gt.clean_series = CasoratiSeries(std::move(clean), d, labels);

  // Per DW column and slice: exp(i * random 2-D polynomial of degree phase_order).
  CMatrix phase = CMatrix::Ones(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  auto phase_rng = stream(cfg.seed, 1);
  std::uniform_real_distribution<double> coef(-cfg.phase_amplitude, cfg.phase_amplitude);
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k].is_b0()) continue;
    for (std::size_t z = 0; z < d.nz; ++z) {
      std::vector<std::pair<std::pair<int, int>, double>> terms;
      for (int total = 0; total <= cfg.phase_order; ++total)
        for (int px = 0; px <= total; ++px) terms.push_back({{px, total - px}, coef(phase_rng)});
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const double u = (static_cast<double>(x) - 0.5 * static_cast<double>(d.nx)) / (0.5 * static_cast<double>(d.nx));
          const double v = (static_cast<double>(y) - 0.5 * static_cast<double>(d.ny)) / (0.5 * static_cast<double>(d.ny));
          double angle = 0.0;
          for (const auto& [p, c] : terms) angle += c * std::pow(u, p.first) * std::pow(v, p.second);
          phase(static_cast<Eigen::Index>(d.index(x, y, z)), static_cast<Eigen::Index>(k)) = std::polar(1.0, angle);
        }
    }
  }
  gt.phase = PhaseMap(std::move(phase));

  // Gaussian bumps placed around the FOV with a linear phase ramp each,
  // normalised to unit sum of squares at every voxel.
  gt.coils.dims = d;
  gt.coils.maps.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(cfg.n_coils));
  const double cx = 0.5 * static_cast<double>(d.nx), cy = 0.5 * static_cast<double>(d.ny);
  const double width = 0.5 * static_cast<double>(std::max(d.nx, d.ny));
  for (std::size_t c = 0; c < cfg.n_coils; ++c) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(cfg.n_coils) + 0.25 * std::numbers::pi;
    const double px = cx + 0.6 * static_cast<double>(d.nx) * std::cos(theta);
    const double py = cy + 0.6 * static_cast<double>(d.ny) * std::sin(theta);
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const double dx = static_cast<double>(x) - px, dy = static_cast<double>(y) - py;
          const double mag = std::exp(-0.5 * (dx * dx + dy * dy) / (width * width));
          const double ramp = 0.6 * std::numbers::pi *
                              (std::cos(theta) * static_cast<double>(x) / static_cast<double>(d.nx) +
                               std::sin(theta) * static_cast<double>(y) / static_cast<double>(d.ny)) +
                              theta;
          gt.coils.maps(static_cast<Eigen::Index>(d.index(x, y, z)), static_cast<Eigen::Index>(c)) = std::polar(mag, ramp);
        }
  }
  const RVector sos = gt.coils.sum_of_squares();
  for (Eigen::Index j = 0; j < gt.coils.maps.rows(); ++j) gt.coils.maps.row(j) /= std::sqrt(sos(j));
  return gt;
}

encoding::KSpaceData acquire(const GroundTruth& truth, std::uint64_t noise_seed) {
  const auto& d = truth.config.grid;
  encoding::EncodingModel model{truth.coils, encoding::full_mask(d.ny, d.nz, truth.clean_series.cols()), std::nullopt};
  auto data = encoding::forward_data(model, truth.phased_series());
  return encoding::add_noise(data, encoding::noise_sigma(truth.mean_s0(), truth.config.snr), noise_seed);
}

void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& gt) {
  const Dims3& d = gt.config.grid;
  write_container(dir / "clean_series", to_container(gt.clean_series));
  write_container(dir / "phase", to_container(gt.phase, d));
  write_container(dir / "coils", to_container(gt.coils));
  write_container(dir / "tensors", dti::to_container(gt.tensors));
  write_container(dir / "ha_map", volume_container("HelixAngleMap", d, gt.ha_map));
  write_container(dir / "md_map", volume_container("MeanDiffusivityMap", d, gt.md_map));
  write_container(dir / "myocardium_mask", bool_volume_container("Mask", d, gt.myocardium_mask));
  json truth = {{"hat_global", gt.hat_global}, {"md_true", gt.config.md_true}, {"config", to_json(gt.config)}};
  json centers = json::array();
  for (const auto& c : gt.config.centers()) centers.push_back({c.x, c.y});
  truth["lv_center"] = centers;
  std::ofstream out(dir / "truth.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "truth.json").string());
  out << truth.dump(2) << '\n';
}

}  // namespace lrcs::phantom
