#include "lrcs/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace lrcs {

static_assert(std::endian::native == std::endian::little, "container payloads are written in host byte order");

namespace {

constexpr const char* kFormat = "lrcs-cdti-container";
constexpr int kVersion = 1;

template <typename T>
void append_bytes(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_count(std::size_t n, const std::vector<std::size_t>& shape) {
  if (n != product(shape)) throw ValidationError("array value count does not match its shape");
}

std::vector<std::size_t> volume_shape(const Dims3& d) { return {d.nz, d.ny, d.nx}; }

void expect_kind(const Container& c, const std::string& kind) {
  if (c.kind != kind) throw FormatError("container kind '" + c.kind + "' where '" + kind + "' was expected");
}

}  // namespace

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "complex64") return 8;
  if (dtype == "complex128") return 16;
  if (dtype == "float32") return 4;
  if (dtype == "float64") return 8;
  if (dtype == "bool") return 1;
  throw FormatError("unsupported dtype '" + dtype + "'");
}

std::size_t Array::elements() const { return product(shape); }

Array Array::from_complex(std::span<const cplx> values, std::vector<std::size_t> shape, bool single_precision) {
  check_count(values.size(), shape);
  Array a{single_precision ? "complex64" : "complex128", std::move(shape), {}};
  a.bytes.reserve(values.size() * dtype_size(a.dtype));
  for (const auto& v : values) {
    if (single_precision) {
      append_bytes(a.bytes, static_cast<float>(v.real()));
      append_bytes(a.bytes, static_cast<float>(v.imag()));
    } else {
      append_bytes(a.bytes, v.real());
      append_bytes(a.bytes, v.imag());
    }
  }
  return a;
}

Array Array::from_real(std::span<const double> values, std::vector<std::size_t> shape, bool single_precision) {
  check_count(values.size(), shape);
  Array a{single_precision ? "float32" : "float64", std::move(shape), {}};
  a.bytes.reserve(values.size() * dtype_size(a.dtype));
  for (double v : values) {
    if (single_precision)
      append_bytes(a.bytes, static_cast<float>(v));
    else
      append_bytes(a.bytes, v);
  }
  return a;
}

Array Array::from_bool(std::span<const std::uint8_t> values, std::vector<std::size_t> shape) {
  check_count(values.size(), shape);
  Array a{"bool", std::move(shape), {}};
  a.bytes.reserve(values.size());
  for (auto v : values) a.bytes.push_back(v ? 1 : 0);
  return a;
}

std::vector<cplx> Array::to_complex() const {
  std::vector<cplx> out(elements());
  const auto* p = bytes.data();
  if (dtype == "complex64") {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {load<float>(p + 8 * i), load<float>(p + 8 * i + 4)};
  } else if (dtype == "complex128") {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {load<double>(p + 16 * i), load<double>(p + 16 * i + 8)};
  } else {
    const auto re = to_real();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = re[i];
  }
  return out;
}

std::vector<double> Array::to_real() const {
  std::vector<double> out(elements());
  const auto* p = bytes.data();
  if (dtype == "float32") {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = load<float>(p + 4 * i);
  } else if (dtype == "float64") {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = load<double>(p + 8 * i);
  } else if (dtype == "bool") {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = p[i] ? 1.0 : 0.0;
  } else {
    throw FormatError("array of dtype " + dtype + " cannot be read as real");
  }
  return out;
}

std::vector<std::uint8_t> Array::to_bool() const {
  if (dtype != "bool") throw FormatError("array of dtype " + dtype + " cannot be read as bool");
  return bytes;
}

const Array& Container::at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw FormatError("container of kind '" + kind + "' has no array '" + name + "'");
  return it->second;
}

void write_container(const std::filesystem::path& dir, const Container& c) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create container directory " + dir.string() + ": " + ec.message());

  json header = c.meta;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["kind"] = c.kind;
  header["axis_order"] = "row-major, x fastest";
  header["endianness"] = "little";
  json arrays = json::object();
  for (const auto& [name, a] : c.arrays) {
    const std::size_t esize = dtype_size(a.dtype);
    if (a.bytes.size() != a.elements() * esize) throw ValidationError("array '" + name + "' byte count does not match shape");
    const std::string file = name + ".raw";
    arrays[name] = {{"dtype", a.dtype}, {"shape", a.shape}, {"file", file}};
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(a.bytes.data()), static_cast<std::streamsize>(a.bytes.size()));
    if (!out) throw IoError("write failed for " + (dir / file).string());
  }
  header["arrays"] = arrays;
  std::ofstream out(dir / "header.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "header.json").string());
  out << header.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + (dir / "header.json").string());
}

Container read_container(const std::filesystem::path& dir) {
  const auto header_path = dir / "header.json";
  std::ifstream in(header_path);
  if (!in) throw IoError("cannot open " + header_path.string());
  json header;
  try {
    header = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed header " + header_path.string() + ": " + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kFormat || !header.contains("arrays") ||
      !header["arrays"].is_object())
    throw FormatError("malformed header " + header_path.string());
  if (header.value("endianness", "") != "little") throw FormatError("unsupported endianness in " + header_path.string());

  Container c;
  c.kind = header.value("kind", "");
  for (const auto& [name, spec] : header["arrays"].items()) {
    Array a;
    try {
      a.dtype = spec.at("dtype").get<std::string>();
      a.shape = spec.at("shape").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      throw FormatError("malformed header entry for array '" + name + "': " + e.what());
    }
    const std::size_t expected = a.elements() * dtype_size(a.dtype);
    const auto payload = dir / spec.value("file", name + ".raw");
    std::ifstream bin(payload, std::ios::binary | std::ios::ate);
    if (!bin) throw IoError("cannot open payload " + payload.string());
    const auto size = static_cast<std::size_t>(bin.tellg());
    if (size != expected)
      throw FormatError("payload length mismatch for '" + name + "': expected " + std::to_string(expected) +
                        " bytes, found " + std::to_string(size));
    bin.seekg(0);
    a.bytes.resize(size);
    bin.read(reinterpret_cast<char*>(a.bytes.data()), static_cast<std::streamsize>(size));
    c.arrays.emplace(name, std::move(a));
  }
  for (const auto& [key, value] : header.items())
    if (key != "arrays" && key != "format" && key != "version" && key != "kind" && key != "axis_order" &&
        key != "endianness")
      c.meta[key] = value;
  return c;
}

json labels_to_json(std::span<const ColumnLabel> labels) {
  json out = json::array();
  for (const auto& l : labels)
    out.push_back({{"b_value", l.b_value},
                   {"direction", {l.direction.x(), l.direction.y(), l.direction.z()}},
                   {"average_index", l.average_index}});
  return out;
}

std::vector<ColumnLabel> labels_from_json(const json& j) {
  std::vector<ColumnLabel> out;
  try {
    for (const auto& e : j) {
      const auto d = e.at("direction").get<std::vector<double>>();
      if (d.size() != 3) throw FormatError("direction must have 3 components");
      out.push_back({e.at("b_value").get<double>(), Vec3(d[0], d[1], d[2]), e.value("average_index", 0)});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed column_labels: ") + e.what());
  }
  return out;
}

json dims_to_json(const Dims3& d) { return json::array({d.nx, d.ny, d.nz}); }

Dims3 dims_from_json(const json& j) {
  try {
    const auto v = j.get<std::vector<std::size_t>>();
    if (v.size() != 3) throw FormatError("spatial_dims must have 3 entries");
    return {v[0], v[1], v[2]};
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed spatial_dims: ") + e.what());
  }
}

Container to_container(const CasoratiSeries& s, bool single_precision) {
  Container c{"CasoratiSeries", {}, {}};
  c.meta["spatial_dims"] = dims_to_json(s.dims());
  c.meta["column_labels"] = labels_to_json(s.labels());
  const auto& d = s.data();
  c.arrays["data"] = Array::from_complex({d.data(), static_cast<std::size_t>(d.size())},
                                         {s.cols(), s.dims().nz, s.dims().ny, s.dims().nx}, single_precision);
  return c;
}

CasoratiSeries casorati_from_container(const Container& c) {
  expect_kind(c, "CasoratiSeries");
  const Dims3 dims = dims_from_json(c.meta.at("spatial_dims"));
  auto labels = labels_from_json(c.meta.at("column_labels"));
  const auto& a = c.at("data");
  if (a.shape.size() != 4 || a.shape[0] != labels.size() || a.shape[1] != dims.nz || a.shape[2] != dims.ny ||
      a.shape[3] != dims.nx)
    throw InvariantError("CasoratiSeries data shape does not match spatial_dims/column_labels");
  const auto values = a.to_complex();
  CMatrix data(static_cast<Eigen::Index>(dims.voxels()), static_cast<Eigen::Index>(labels.size()));
  std::copy(values.begin(), values.end(), data.data());
  return {std::move(data), dims, std::move(labels)};
}

Container to_container(const SamplingMask& m) {
  Container c{"SamplingMask", {}, {}};
  c.meta["R_nominal"] = m.r_nominal();
  c.meta["seed"] = m.seed();
  c.meta["scheme"] = m.scheme();
  c.meta["R_measured"] = m.r_measured();
  c.arrays["kept"] = Array::from_bool(m.raw(), {m.columns(), m.nz(), m.n_pe()});
  return c;
}

SamplingMask mask_from_container(const Container& c) {
  expect_kind(c, "SamplingMask");
  const auto& a = c.at("kept");
  if (a.shape.size() != 3) throw FormatError("SamplingMask 'kept' must be 3-D");
  SamplingMask m(a.shape[2], a.shape[1], a.shape[0], c.meta.value("R_nominal", 1.0),
                 c.meta.value("seed", std::uint64_t{0}), c.meta.value("scheme", std::string("proposed")));
  m.raw() = a.to_bool();
  return m;
}

Container to_container(const PhaseMap& p, const Dims3& dims) {
  Container c{"PhaseMap", {}, {}};
  c.meta["spatial_dims"] = dims_to_json(dims);
  const auto& v = p.values();
  c.arrays["values"] = Array::from_complex({v.data(), static_cast<std::size_t>(v.size())},
                                           {static_cast<std::size_t>(v.cols()), dims.nz, dims.ny, dims.nx});
  return c;
}

PhaseMap phase_from_container(const Container& c) {
  expect_kind(c, "PhaseMap");
  const Dims3 dims = dims_from_json(c.meta.at("spatial_dims"));
  const auto& a = c.at("values");
  if (a.shape.size() != 4) throw FormatError("PhaseMap values must be 4-D");
  const auto values = a.to_complex();
  CMatrix m(static_cast<Eigen::Index>(dims.voxels()), static_cast<Eigen::Index>(a.shape[0]));
  if (values.size() != static_cast<std::size_t>(m.size())) throw InvariantError("PhaseMap shape does not match spatial_dims");
  std::copy(values.begin(), values.end(), m.data());
  // Single-precision storage cannot hold unit magnitude to 1e-12.
  const double tol = a.dtype == "complex64" ? 1e-6 : 1e-12;
  return PhaseMap(std::move(m), tol);
}

Container to_container(const CoilMaps& maps) {
  Container c{"CoilMaps", {}, {}};
  c.meta["spatial_dims"] = dims_to_json(maps.dims);
  c.arrays["maps"] =
      Array::from_complex({maps.maps.data(), static_cast<std::size_t>(maps.maps.size())},
                          {maps.coils(), maps.dims.nz, maps.dims.ny, maps.dims.nx});
  return c;
}

CoilMaps coils_from_container(const Container& c) {
  expect_kind(c, "CoilMaps");
  CoilMaps out;
  out.dims = dims_from_json(c.meta.at("spatial_dims"));
  const auto& a = c.at("maps");
  if (a.shape.size() != 4 || a.shape[1] != out.dims.nz || a.shape[2] != out.dims.ny || a.shape[3] != out.dims.nx)
    throw InvariantError("CoilMaps shape does not match spatial_dims");
  const auto values = a.to_complex();
  out.maps.resize(static_cast<Eigen::Index>(out.dims.voxels()), static_cast<Eigen::Index>(a.shape[0]));
  std::copy(values.begin(), values.end(), out.maps.data());
  return out;
}

Container volume_container(const std::string& kind, const Dims3& dims, std::span<const double> values) {
  Container c{kind, {}, {}};
  c.meta["spatial_dims"] = dims_to_json(dims);
  c.arrays["values"] = Array::from_real(values, volume_shape(dims));
  return c;
}

Container bool_volume_container(const std::string& kind, const Dims3& dims, std::span<const std::uint8_t> values) {
  Container c{kind, {}, {}};
  c.meta["spatial_dims"] = dims_to_json(dims);
  c.arrays["values"] = Array::from_bool(values, volume_shape(dims));
  return c;
}

}  // namespace lrcs
