#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lrcs {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

/// Spatial extent of one volume. Voxels are linearized x fastest, then y, then z.
struct Dims3 {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t voxels() const { return nx * ny * nz; }
  std::size_t slice_size() const { return nx * ny; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + nx * (y + ny * z); }

  friend bool operator==(const Dims3&, const Dims3&) = default;
};

// Error hierarchy. ValidationError maps to CLI exit code 1, NumericalError to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvariantError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrcs
