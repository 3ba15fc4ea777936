#include "lrcs/dti.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace lrcs::dti {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDeg = 180.0 / std::numbers::pi;

// Design uses b in ms/um^2 (b / 1000) so all unknowns are O(1).
constexpr double kBScale = 1e-3;

Eigen::Matrix<double, 1, 7> design_row(const ColumnLabel& l) {
  const double b = l.b_value * kBScale;
  const Vec3& g = l.direction;
  Eigen::Matrix<double, 1, 7> row;
  row << 1.0, -b * g.x() * g.x(), -b * g.y() * g.y(), -b * g.z() * g.z(), -2.0 * b * g.x() * g.y(),
      -2.0 * b * g.x() * g.z(), -2.0 * b * g.y() * g.z();
  return row;
}

}  // namespace

Eigen::Matrix3d to_matrix(const Tensor6& t) {
  Eigen::Matrix3d m;
  m << t[0], t[3], t[4], t[3], t[1], t[5], t[4], t[5], t[2];
  return m;
}

Tensor6 from_matrix(const Eigen::Matrix3d& m) {
  return {m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(1, 2) + m(2, 1))};
}

TensorField TensorField::from_tensors(const Dims3& dims, std::vector<std::uint8_t> mask, std::vector<Tensor6> tensors,
                                      std::vector<double> s0) {
  const std::size_t m = dims.voxels();
  if (mask.size() != m || tensors.size() != m || s0.size() != m) throw ValidationError("tensor field size mismatch");
  TensorField f{dims, std::move(mask), std::move(tensors), std::move(s0), {}, {}, 0};
  f.eigenvalues.assign(m, Vec3::Zero());
  f.e1.assign(m, Vec3::Zero());
  for (std::size_t j = 0; j < m; ++j) {
    if (!f.mask[j]) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(to_matrix(f.tensors[j]));
    Vec3 ev = es.eigenvalues().reverse();
    for (int i = 0; i < 3; ++i)
      if (ev(i) < 0.0) {
        ev(i) = 0.0;
        ++f.clamped_eigenvalues;
      }
    Vec3 v = es.eigenvectors().col(2);
    if (v.z() < 0.0) v = -v;
    f.eigenvalues[j] = ev;
    f.e1[j] = v;
  }
  return f;
}

double signal(const Tensor6& d, double s0, const ColumnLabel& label) {
  if (label.is_b0()) return s0;
  const Vec3& g = label.direction;
  return s0 * std::exp(-label.b_value * g.dot(to_matrix(d) * g));
}

TensorField fit_tensors(const CasoratiSeries& magnitude, std::span<const std::uint8_t> mask) {
  const auto& labels = magnitude.labels();
  const std::size_t m = magnitude.rows(), n = magnitude.cols();
  if (mask.size() != m) throw ValidationError("fit_tensors: mask size does not match series");
  std::size_t n_b0 = 0;
  for (const auto& l : labels) n_b0 += l.is_b0() ? 1 : 0;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 7);
  for (std::size_t k = 0; k < n; ++k) design.row(static_cast<Eigen::Index>(k)) = design_row(labels[k]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> check(design);
  if (n_b0 == 0 || check.rank() < 7) {
    std::ostringstream os;
    os << "fit_tensors: rank-deficient design (" << n_b0 << " b=0 columns); directions:";
    for (const auto& l : labels)
      if (!l.is_b0()) os << " (" << l.direction.x() << ", " << l.direction.y() << ", " << l.direction.z() << ")";
    throw ValidationError(os.str());
  }

  std::vector<Tensor6> tensors(m, Tensor6{});
  std::vector<double> s0(m, 0.0);
  std::vector<std::uint8_t> fit_mask(mask.begin(), mask.end());
  const double floor = std::numeric_limits<double>::epsilon();
  const auto& data = magnitude.data();
  Eigen::MatrixXd weighted(static_cast<Eigen::Index>(n), 7);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < m; ++j) {
    if (!mask[j]) continue;
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double s = std::max(std::abs(data(static_cast<Eigen::Index>(j), kk)), floor);
      // weights s^2 on squared residuals
      weighted.row(kk) = s * design.row(kk);
      rhs(kk) = s * std::log(s);
    }
    const Eigen::VectorXd beta = weighted.colPivHouseholderQr().solve(rhs);
    s0[j] = std::exp(beta(0));
    for (int i = 0; i < 6; ++i) tensors[j][static_cast<std::size_t>(i)] = beta(i + 1) * kBScale;
  }
  return TensorField::from_tensors(magnitude.dims(), std::move(fit_mask), std::move(tensors), std::move(s0));
}

double mean_diffusivity(const Vec3& ev) { return ev.sum() / 3.0; }

double fractional_anisotropy(const Vec3& ev) {
  const double norm = ev.norm();
  if (norm == 0.0) return 0.0;
  const double md = mean_diffusivity(ev);
  return std::sqrt(1.5) * (ev - Vec3::Constant(md)).norm() / norm;
}

std::vector<double> mean_diffusivity(const TensorField& f) {
  std::vector<double> out(f.dims.voxels(), kNaN);
  for (std::size_t j = 0; j < out.size(); ++j)
    if (f.mask[j]) out[j] = mean_diffusivity(f.eigenvalues[j]);
  return out;
}

std::vector<double> fractional_anisotropy(const TensorField& f) {
  std::vector<double> out(f.dims.voxels(), kNaN);
  for (std::size_t j = 0; j < out.size(); ++j)
    if (f.mask[j]) out[j] = fractional_anisotropy(f.eigenvalues[j]);
  return out;
}

std::vector<Center> mask_centroids(std::span<const std::uint8_t> mask, const Dims3& dims) {
  std::vector<Center> out(dims.nz, Center{static_cast<double>(dims.nx / 2), static_cast<double>(dims.ny / 2)});
  for (std::size_t z = 0; z < dims.nz; ++z) {
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y < dims.ny; ++y)
      for (std::size_t x = 0; x < dims.nx; ++x)
        if (mask[dims.index(x, y, z)]) {
          sx += static_cast<double>(x);
          sy += static_cast<double>(y);
          ++count;
        }
    if (count) out[z] = {sx / static_cast<double>(count), sy / static_cast<double>(count)};
  }
  return out;
}

double helix_angle_of(const Vec3& e1, const Vec3& rel) {
  const Vec3 radial = Vec3(rel.x(), rel.y(), 0.0).normalized();
  const Vec3 longitudinal(0.0, 0.0, 1.0);
  const Vec3 circumferential = longitudinal.cross(radial);
  double c = e1.dot(circumferential);
  double l = e1.dot(longitudinal);
  if (c < 0.0) {
    c = -c;
    l = -l;
  }
  if (c == 0.0) return l == 0.0 ? 0.0 : 90.0;
  return std::atan(l / c) * kDeg;
}

HelixAngleMap helix_angle(const TensorField& f, std::span<const Center> centers) {
  const auto& d = f.dims;
  if (centers.size() != d.nz) throw ValidationError("helix_angle: need one LV centre per slice");
  HelixAngleMap out{std::vector<double>(d.voxels(), kNaN), 0, {}};
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t j = d.index(x, y, z);
        if (!f.mask[j]) continue;
        const Vec3 rel(static_cast<double>(x) - centers[z].x, static_cast<double>(y) - centers[z].y, 0.0);
        if (rel.norm() == 0.0) {
          ++out.excluded;
          continue;
        }
        out.degrees[j] = helix_angle_of(f.e1[j], rel);
      }
  if (out.excluded) out.warnings.push_back(std::to_string(out.excluded) + " voxel(s) at the LV centre excluded from HA");
  return out;
}

std::vector<RaySample> trace_ray(std::span<const std::uint8_t> mask, const Dims3& dims, std::size_t z,
                                 const Center& center, double angle) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  constexpr double kStep = 0.25;
  // Distinct voxels in the order the ray meets them.
  std::vector<std::size_t> voxels;
  std::vector<double> along;
  for (double s = 0.0;; s += kStep) {
    const double fx = center.x + s * dx, fy = center.y + s * dy;
    const long ix = std::lround(fx), iy = std::lround(fy);
    if (ix < 0 || iy < 0 || ix >= static_cast<long>(dims.nx) || iy >= static_cast<long>(dims.ny)) break;
    const std::size_t j = dims.index(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy), z);
    if (voxels.empty() || voxels.back() != j) {
      voxels.push_back(j);
      along.push_back((static_cast<double>(ix) - center.x) * dx + (static_cast<double>(iy) - center.y) * dy);
    }
  }
  std::size_t first = voxels.size(), last = 0;
  for (std::size_t i = 0; i < voxels.size(); ++i)
    if (mask[voxels[i]]) {
      first = std::min(first, i);
      last = i;
    }
  if (first == voxels.size()) return {};
  const double endo = first > 0 ? 0.5 * (along[first - 1] + along[first]) : along[first];
  const double epi = last + 1 < voxels.size() ? 0.5 * (along[last] + along[last + 1]) : along[last];
  std::vector<RaySample> out;
  if (!(epi > endo)) return out;
  for (std::size_t i = first; i <= last; ++i)
    if (mask[voxels[i]]) out.push_back({voxels[i], 100.0 * (along[i] - endo) / (epi - endo)});
  return out;
}

HatResult compute_hat(std::span<const double> ha, std::span<const std::uint8_t> mask, const Dims3& dims,
                      std::span<const Center> centers, std::size_t n_rays) {
  if (centers.size() != dims.nz) throw ValidationError("compute_hat: need one LV centre per slice");
  if (ha.size() != dims.voxels() || mask.size() != dims.voxels()) throw ValidationError("compute_hat: map size mismatch");
  HatResult out;
  out.per_slice.assign(dims.nz, kNaN);
  double global_sum = 0.0;
  std::size_t global_n = 0;
  for (std::size_t z = 0; z < dims.nz; ++z) {
    double slice_sum = 0.0;
    std::size_t slice_n = 0;
    for (std::size_t r = 0; r < n_rays; ++r) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n_rays);
      std::vector<double> td, values;
      for (const auto& s : trace_ray(mask, dims, z, centers[z], angle))
        if (std::isfinite(ha[s.voxel])) {
          td.push_back(s.td);
          values.push_back(ha[s.voxel]);
        }
      if (td.size() < 3) {
        ++out.skipped_rays;
        continue;
      }
      const auto n = static_cast<double>(td.size());
      double mt = 0.0, mv = 0.0;
      for (std::size_t i = 0; i < td.size(); ++i) {
        mt += td[i];
        mv += values[i];
      }
      mt /= n;
      mv /= n;
      double stt = 0.0, stv = 0.0, svv = 0.0;
      for (std::size_t i = 0; i < td.size(); ++i) {
        stt += (td[i] - mt) * (td[i] - mt);
        stv += (td[i] - mt) * (values[i] - mv);
        svv += (values[i] - mv) * (values[i] - mv);
      }
      if (stt == 0.0) {
        ++out.skipped_rays;
        continue;
      }
      const double slope = stv / stt;
      const double r2 = svv == 0.0 ? 1.0 : (stv * stv) / (stt * svv);
      out.rays.push_back({z, r, angle, slope, r2, td.size()});
      slice_sum += slope;
      ++slice_n;
    }
    if (slice_n) {
      out.per_slice[z] = slice_sum / static_cast<double>(slice_n);
      global_sum += out.per_slice[z];
      ++global_n;
    }
  }
  out.global = global_n ? global_sum / static_cast<double>(global_n) : kNaN;
  return out;
}

std::vector<Band> default_slice_bands(std::size_t nz) {
  std::vector<Band> bands;
  const std::size_t base = nz / 3, extra = nz % 3;
  const Band order[3] = {Band::Basal, Band::Mid, Band::Apical};
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < base + (b < extra ? 1 : 0); ++i) bands.push_back(order[b]);
  return bands;
}

int aha_segment(Band band, double angle, double reference_angle) {
  const double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle - reference_angle, two_pi);
  if (a < 0.0) a += two_pi;
  const int sectors = band == Band::Apical ? 4 : 6;
  int s = static_cast<int>(std::floor(a / (two_pi / sectors)));
  s = std::clamp(s, 0, sectors - 1);
  switch (band) {
    case Band::Basal:
      return 1 + s;
    case Band::Mid:
      return 7 + s;
    case Band::Apical:
      return 13 + s;
  }
  return 0;
}

AhaSegmentation segment_aha16(std::span<const std::uint8_t> mask, const Dims3& dims, std::span<const Center> centers,
                              double reference_angle, std::optional<std::vector<Band>> bands) {
  if (centers.size() != dims.nz) throw ValidationError("segment_aha16: need one LV centre per slice");
  AhaSegmentation seg;
  seg.reference_angle = reference_angle;
  seg.slice_band = bands ? *bands : default_slice_bands(dims.nz);
  if (seg.slice_band.size() != dims.nz) throw ValidationError("segment_aha16: band list does not match slice count");
  for (Band b : {Band::Basal, Band::Mid, Band::Apical})
    if (std::find(seg.slice_band.begin(), seg.slice_band.end(), b) == seg.slice_band.end())
      throw ValidationError("segment_aha16: empty band (need at least 3 slices)");
  seg.segment.assign(dims.voxels(), 0);
  for (std::size_t z = 0; z < dims.nz; ++z)
    for (std::size_t y = 0; y < dims.ny; ++y)
      for (std::size_t x = 0; x < dims.nx; ++x) {
        const std::size_t j = dims.index(x, y, z);
        if (!mask[j]) continue;
        const double angle = std::atan2(static_cast<double>(y) - centers[z].y, static_cast<double>(x) - centers[z].x);
        seg.segment[j] = aha_segment(seg.slice_band[z], angle, reference_angle);
      }
  return seg;
}

namespace {

std::array<SegmentStat, 16> summarize(const std::array<std::vector<double>, 16>& groups) {
  std::array<SegmentStat, 16> out{};
  for (std::size_t s = 0; s < 16; ++s) {
    const auto& g = groups[s];
    out[s].segment = static_cast<int>(s) + 1;
    out[s].n = g.size();
    if (g.empty()) {
      out[s].mean = out[s].stddev = kNaN;
      continue;
    }
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    double var = 0.0;
    for (double v : g) var += (v - mean) * (v - mean);
    out[s].mean = mean;
    out[s].stddev = g.size() > 1 ? std::sqrt(var / static_cast<double>(g.size() - 1)) : 0.0;
  }
  return out;
}

}  // namespace

std::array<SegmentStat, 16> regional_hat(const HatResult& hat, const AhaSegmentation& seg) {
  std::array<std::vector<double>, 16> groups;
  for (const auto& r : hat.rays) {
    const int s = aha_segment(seg.slice_band.at(r.slice), r.angle, seg.reference_angle);
    groups[static_cast<std::size_t>(s - 1)].push_back(r.slope);
  }
  return summarize(groups);
}

std::array<SegmentStat, 16> regional_mean(std::span<const double> values, const AhaSegmentation& seg) {
  std::array<std::vector<double>, 16> groups;
  for (std::size_t j = 0; j < values.size() && j < seg.segment.size(); ++j)
    if (seg.segment[j] > 0 && std::isfinite(values[j])) groups[static_cast<std::size_t>(seg.segment[j] - 1)].push_back(values[j]);
  return summarize(groups);
}

double masked_mean(std::span<const double> values, std::span<const std::uint8_t> mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < values.size(); ++j)
    if (mask[j] && std::isfinite(values[j])) {
      sum += values[j];
      ++n;
    }
  return n ? sum / static_cast<double>(n) : kNaN;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values, const Dims3& dims, double window,
               double level) {
  if (values.size() != dims.voxels()) throw ValidationError("write_pgm: map size mismatch");
  const std::size_t width = dims.nx * dims.nz, height = dims.ny;
  std::vector<std::uint8_t> pixels(width * height, 0);
  const double lo = level - 0.5 * window;
  for (std::size_t z = 0; z < dims.nz; ++z)
    for (std::size_t y = 0; y < dims.ny; ++y)
      for (std::size_t x = 0; x < dims.nx; ++x) {
        const double v = values[dims.index(x, y, z)];
        if (!std::isfinite(v)) continue;
        const double t = std::clamp((v - lo) / window, 0.0, 1.0);
        pixels[y * width + z * dims.nx + x] = static_cast<std::uint8_t>(std::lround(255.0 * t));
      }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

Container to_container(const TensorField& f) {
  Container c{"TensorField", {}, {}};
  const auto& d = f.dims;
  c.meta["spatial_dims"] = dims_to_json(d);
  c.meta["component_order"] = "xx, yy, zz, xy, xz, yz";
  c.meta["units"] = "mm^2/s";
  c.meta["clamped_eigenvalues"] = f.clamped_eigenvalues;
  std::vector<double> tensors, evals, e1;
  tensors.reserve(6 * d.voxels());
  for (std::size_t j = 0; j < d.voxels(); ++j) {
    tensors.insert(tensors.end(), f.tensors[j].begin(), f.tensors[j].end());
    for (int i = 0; i < 3; ++i) {
      evals.push_back(f.eigenvalues[j](i));
      e1.push_back(f.e1[j](i));
    }
  }
  c.arrays["tensor"] = Array::from_real(tensors, {d.nz, d.ny, d.nx, 6});
  c.arrays["eigenvalues"] = Array::from_real(evals, {d.nz, d.ny, d.nx, 3});
  c.arrays["e1"] = Array::from_real(e1, {d.nz, d.ny, d.nx, 3});
  c.arrays["s0"] = Array::from_real(f.s0, {d.nz, d.ny, d.nx});
  c.arrays["mask"] = Array::from_bool(f.mask, {d.nz, d.ny, d.nx});
  return c;
}

TensorField tensors_from_container(const Container& c) {
  if (c.kind != "TensorField") throw FormatError("container kind '" + c.kind + "' where 'TensorField' was expected");
  const Dims3 d = dims_from_json(c.meta.at("spatial_dims"));
  const auto raw = c.at("tensor").to_real();
  auto mask = c.at("mask").to_bool();
  auto s0 = c.at("s0").to_real();
  if (raw.size() != 6 * d.voxels() || mask.size() != d.voxels() || s0.size() != d.voxels())
    throw InvariantError("TensorField arrays do not match spatial_dims");
  std::vector<Tensor6> tensors(d.voxels());
  for (std::size_t j = 0; j < d.voxels(); ++j)
    for (std::size_t i = 0; i < 6; ++i) tensors[j][i] = raw[6 * j + i];
  return TensorField::from_tensors(d, std::move(mask), std::move(tensors), std::move(s0));
}

}  // namespace lrcs::dti
