#include <cmath>
#include <random>

#include "lrcs/transforms.hpp"
#include "test_util.hpp"

using namespace lrcs;
using transforms::Wavelet3D;
using transforms::WaveletSpec;

TEST(Wavelet, FilterIsOrthonormal) {
  const auto& h = transforms::kSym4Lowpass;
  double sum = 0.0, energy = 0.0;
  for (double v : h) {
    sum += v;
    energy += v * v;
  }
  EXPECT_NEAR(sum, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(energy, 1.0, 1e-12);
  for (std::size_t shift = 2; shift < h.size(); shift += 2) {
    double c = 0.0;
    for (std::size_t i = 0; i + shift < h.size(); ++i) c += h[i] * h[i + shift];
    EXPECT_NEAR(c, 0.0, 1e-12);
  }
}

TEST(Wavelet, LevelsClipToExtent) {
  const auto s = WaveletSpec::make({64, 64, 4}, 4);
  EXPECT_EQ(s.axis_levels[0], 4);
  EXPECT_EQ(s.axis_levels[1], 4);
  EXPECT_EQ(s.axis_levels[2], 2);
  EXPECT_EQ(WaveletSpec::make({64, 64, 1}, 4).axis_levels[2], 0);
}

TEST(Wavelet, PerfectReconstructionAndParseval) {
  const Wavelet3D w(WaveletSpec::make({64, 64, 4}, 4));
  const CMatrix x = test::random_complex(64 * 64 * 4, 2, 1);
  const CMatrix c = w.forward(x);
  EXPECT_LT((w.adjoint(c) - x).norm() / x.norm(), 1e-12);
  EXPECT_NEAR(c.norm() / x.norm(), 1.0, 1e-12);
}

TEST(Wavelet, ZeroInZeroOut) {
  const Wavelet3D w(WaveletSpec::make({16, 16, 2}, 4));
  EXPECT_EQ(w.forward(CMatrix::Zero(512, 1)).norm(), 0.0);
}

TEST(Wavelet, ConstantVolumeHasNoDetail) {
  const Wavelet3D w(WaveletSpec::make({64, 64, 4}, 4));
  const CMatrix c = w.forward(CMatrix::Constant(64 * 64 * 4, 1, cplx(3.0, -1.0)));
  const auto approx = w.approximation_band();
  double detail = 0.0, kept = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) (approx[static_cast<std::size_t>(i)] ? kept : detail) += std::norm(c(i, 0));
  EXPECT_LT(std::sqrt(detail), 1e-10);
  EXPECT_NEAR(kept, 64.0 * 64.0 * 4.0 * 10.0, 1e-6);
}

TEST(GroupNorm, Examples) {
  EXPECT_EQ(transforms::group_l12_norm(CMatrix::Zero(3, 2)), 0.0);
  CMatrix one = CMatrix::Zero(2, 2);
  one(1, 0) = cplx(0.0, -3.0);
  EXPECT_DOUBLE_EQ(transforms::group_l12_norm(one), 3.0);
  EXPECT_NEAR(transforms::group_l12_norm(CMatrix::Ones(2, 2)), 2.0 * std::sqrt(2.0), 1e-15);
}

TEST(GroupShrink, Examples) {
  CMatrix small(1, 2);
  small << 0.3, 0.4;
  EXPECT_EQ(transforms::group_shrink(small, 1.0).norm(), 0.0);
  CMatrix scalar(2, 1);
  scalar << 2.0, -2.0;
  const CMatrix s = transforms::group_shrink(scalar, 1.0);
  EXPECT_NEAR(s(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(s(1, 0).real(), -1.0, 1e-15);
  CMatrix g(1, 2);
  g << 3.0, 4.0;
  const CMatrix r = transforms::group_shrink(g, 1.0);
  EXPECT_NEAR(r(0, 0).real(), 2.4, 1e-15);
  EXPECT_NEAR(r(0, 1).real(), 3.2, 1e-15);
  EXPECT_DOUBLE_EQ(transforms::soft_threshold(-2.0, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(transforms::soft_threshold(0.5, 1.0), 0.0);
}

TEST(GroupShrink, BeatsRandomPerturbations) {
  // Objective alpha*||g|| + 1/2 ||g - z||^2 per group.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  std::normal_distribution<double> n(0.0, 1.0);
  int violations = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index len = 1 + inst % 6;
    const CMatrix z = test::random_complex(1, len, 100 + static_cast<std::uint64_t>(inst)) * u(rng);
    const double alpha = u(rng);
    const CMatrix g = transforms::group_shrink(z, alpha);
    auto f = [&](const CMatrix& x) { return alpha * x.norm() + 0.5 * (x - z).squaredNorm(); };
    const double best = f(g);
    for (int t = 0; t < 2000; ++t) {
      CMatrix p = g;
      const double scale = std::pow(10.0, -3.0 + 3.0 * (t % 4) / 3.0);
      for (Eigen::Index k = 0; k < len; ++k) p(0, k) += scale * cplx(n(rng), n(rng));
      if (f(p) < best - 1e-13) ++violations;
    }
  }
  EXPECT_EQ(violations, 0);
}
