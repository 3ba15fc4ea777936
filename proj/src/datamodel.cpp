#include "lrcs/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

namespace lrcs {

std::vector<ColumnLabel> make_column_labels(std::size_t n_b0, double b_value, std::span<const Vec3> directions,
                                            int n_averages) {
  std::vector<ColumnLabel> labels;
  for (std::size_t i = 0; i < n_b0; ++i) labels.push_back({0.0, Vec3::Zero(), static_cast<int>(i)});
  for (int a = 0; a < n_averages; ++a)
    for (const auto& g : directions) labels.push_back({b_value, g.normalized(), a});
  return labels;
}

void validate_labels(std::span<const ColumnLabel> labels) {
  std::set<std::tuple<double, double, double, double, int>> seen;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto& l = labels[k];
    if (l.b_value < 0.0 || !std::isfinite(l.b_value))
      throw InvariantError("column " + std::to_string(k) + ": invalid b-value");
    const double norm = l.direction.norm();
    if (l.is_b0()) {
      if (norm != 0.0) throw InvariantError("column " + std::to_string(k) + ": b=0 column must carry the zero direction");
    } else if (std::abs(norm - 1.0) > 1e-9) {
      throw InvariantError("column " + std::to_string(k) + ": direction is not unit length");
    }
    auto key = std::make_tuple(l.b_value, l.direction.x(), l.direction.y(), l.direction.z(), l.average_index);
    if (!seen.insert(key).second) throw InvariantError("column " + std::to_string(k) + ": duplicate label");
  }
}

CasoratiSeries::CasoratiSeries(CMatrix data, Dims3 dims, std::vector<ColumnLabel> labels)
    : data_(std::move(data)), dims_(dims), labels_(std::move(labels)) {
  if (static_cast<std::size_t>(data_.rows()) != dims_.voxels()) {
    std::ostringstream os;
    os << "Casorati rows " << data_.rows() << " != nx*ny*nz = " << dims_.voxels();
    throw InvariantError(os.str());
  }
  if (static_cast<std::size_t>(data_.cols()) != labels_.size())
    throw InvariantError("Casorati columns " + std::to_string(data_.cols()) + " != label count " +
                         std::to_string(labels_.size()));
  validate_labels(labels_);
}

CasoratiSeries reshape_to_casorati(const VolumeSeries& volumes, std::vector<ColumnLabel> labels) {
  const char* axis_names[] = {"x", "y", "z"};
  const std::size_t extents[] = {volumes.dims.nx, volumes.dims.ny, volumes.dims.nz};
  for (int a = 0; a < 3; ++a)
    if (extents[a] == 0) throw ValidationError(std::string("dimension mismatch on axis ") + axis_names[a] + ": zero extent");
  if (volumes.columns == 0) throw ValidationError("dimension mismatch on column axis: zero extent");
  if (labels.size() != volumes.columns)
    throw ValidationError("dimension mismatch on column axis: " + std::to_string(volumes.columns) + " volumes, " +
                          std::to_string(labels.size()) + " labels");
  const std::size_t m = volumes.dims.voxels();
  if (volumes.values.size() != m * volumes.columns)
    throw ValidationError("dimension mismatch on spatial axes: expected " + std::to_string(m * volumes.columns) +
                          " values, got " + std::to_string(volumes.values.size()));
  CMatrix data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(volumes.columns));
  std::copy(volumes.values.begin(), volumes.values.end(), data.data());
  return {std::move(data), volumes.dims, std::move(labels)};
}

VolumeSeries reshape_from_casorati(const CasoratiSeries& series) {
  VolumeSeries out{series.dims(), series.cols(), {}};
  const auto& d = series.data();
  out.values.assign(d.data(), d.data() + d.size());
  return out;
}

SamplingMask::SamplingMask(std::size_t n_pe, std::size_t nz, std::size_t columns, double r_nominal,
                           std::uint64_t seed, std::string scheme)
    : n_pe_(n_pe),
      nz_(nz),
      columns_(columns),
      r_nominal_(r_nominal),
      seed_(seed),
      scheme_(std::move(scheme)),
      kept_(n_pe * nz * columns, 0) {}

std::size_t SamplingMask::lines_kept(std::size_t z, std::size_t k) const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < n_pe_; ++l) n += kept(l, z, k) ? 1 : 0;
  return n;
}

std::size_t SamplingMask::total_kept() const {
  return static_cast<std::size_t>(std::count(kept_.begin(), kept_.end(), std::uint8_t{1}));
}

double SamplingMask::r_measured() const {
  const auto kept = total_kept();
  return kept == 0 ? 0.0 : static_cast<double>(kept_.size()) / static_cast<double>(kept);
}

double r_true(double r_nominal, std::size_t n_b0, std::size_t n_dw) {
  const double total = static_cast<double>(n_b0 + n_dw);
  return total * r_nominal / (static_cast<double>(n_b0) * r_nominal + static_cast<double>(n_dw));
}

PhaseMap::PhaseMap(CMatrix values, double tolerance) : values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const double mag = std::abs(values_.data()[i]);
    if (!(std::abs(mag - 1.0) <= tolerance)) {
      std::ostringstream os;
      os << "phase map entry " << i << " has magnitude " << mag << " (expected 1)";
      throw InvariantError(os.str());
    }
  }
}

PhaseMap PhaseMap::ones(std::size_t rows, std::size_t cols) {
  return PhaseMap(CMatrix::Ones(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)));
}

std::size_t factor_degrees_of_freedom(std::size_t m, std::size_t n, std::size_t l) { return 2 * (m + n - l) * l; }

FactorPair::FactorPair(CMatrix u, CMatrix v) : u_(std::move(u)), v_(std::move(v)) {
  if (u_.cols() != v_.rows()) throw InvariantError("factor rank mismatch between U and V");
  const auto l = v_.rows();
  if (l > std::min(u_.rows(), v_.cols())) throw InvariantError("rank exceeds min(M, N)");
  Eigen::JacobiSVD<CMatrix> svd(v_);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-12 * s(0)) throw InvariantError("V is not full row rank");
}

std::size_t FactorPair::degrees_of_freedom() const {
  return factor_degrees_of_freedom(static_cast<std::size_t>(u_.rows()), static_cast<std::size_t>(v_.cols()), rank());
}

RVector CoilMaps::sum_of_squares() const { return maps.cwiseAbs2().rowwise().sum(); }

void CoilMaps::validate(std::span<const std::uint8_t> support) const {
  if (static_cast<std::size_t>(maps.rows()) != dims.voxels()) throw InvariantError("coil map size does not match dims");
  const RVector sos = sum_of_squares();
  for (std::size_t j = 0; j < support.size() && j < dims.voxels(); ++j)
    if (support[j] && !(sos(static_cast<Eigen::Index>(j)) > 0.0))
      throw InvariantError("zero coil sensitivity at supported voxel " + std::to_string(j));
}

}  // namespace lrcs
