#pragma once

// On-disk container: a directory holding `header.json` plus one raw little-endian
// payload per array. Payloads are row-major over the listed shape, so the last
// shape entry varies fastest. Volumes are listed as [..., nz, ny, nx] (x fastest).

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lrcs/datamodel.hpp"

namespace lrcs {

using json = nlohmann::json;

struct Array {
  std::string dtype;  // complex64 | complex128 | float32 | float64 | bool
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> bytes;

  std::size_t elements() const;

  static Array from_complex(std::span<const cplx> values, std::vector<std::size_t> shape, bool single_precision = false);
  static Array from_real(std::span<const double> values, std::vector<std::size_t> shape, bool single_precision = false);
  static Array from_bool(std::span<const std::uint8_t> values, std::vector<std::size_t> shape);

  std::vector<cplx> to_complex() const;
  std::vector<double> to_real() const;
  std::vector<std::uint8_t> to_bool() const;
};

/// Bytes per element for a supported dtype; throws FormatError otherwise.
std::size_t dtype_size(const std::string& dtype);

struct Container {
  std::string kind;
  json meta = json::object();
  std::map<std::string, Array> arrays;

  const Array& at(const std::string& name) const;
};

void write_container(const std::filesystem::path& dir, const Container& c);
Container read_container(const std::filesystem::path& dir);

json labels_to_json(std::span<const ColumnLabel> labels);
std::vector<ColumnLabel> labels_from_json(const json& j);
json dims_to_json(const Dims3& d);
Dims3 dims_from_json(const json& j);

Container to_container(const CasoratiSeries& s, bool single_precision = false);
CasoratiSeries casorati_from_container(const Container& c);

Container to_container(const SamplingMask& m);
SamplingMask mask_from_container(const Container& c);

Container to_container(const PhaseMap& p, const Dims3& dims);
PhaseMap phase_from_container(const Container& c);

Container to_container(const CoilMaps& maps);
CoilMaps coils_from_container(const Container& c);

/// Named real-valued or boolean volume (HA, MD, FA maps, masks).
Container volume_container(const std::string& kind, const Dims3& dims, std::span<const double> values);
Container bool_volume_container(const std::string& kind, const Dims3& dims, std::span<const std::uint8_t> values);

}  // namespace lrcs
