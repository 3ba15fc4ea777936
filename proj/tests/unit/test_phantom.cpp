#include <cmath>
#include <limits>

#include "lrcs/encoding.hpp"
#include "lrcs/phantom.hpp"
#include "lrcs/recon.hpp"
#include "test_util.hpp"

using namespace lrcs;

TEST(Phantom, DefaultConfigValidates) {
  phantom::PhantomConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.labels().size(), 13u);
  EXPECT_EQ(phantom::default_directions().size(), 12u);
}

TEST(Phantom, InvalidConfigsAreRejected) {
  phantom::PhantomConfig c;
  c.r_endo = 30.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.ha_endo = -10.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.fa_true = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.b_values = {1000.0};
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.lv_center = {{10.0, 10.0}, {10.0, 10.0}, {10.0, 10.0}, {10.0, 10.0}};
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Phantom, ConfigJsonRoundTrip) {
  phantom::PhantomConfig c = test::small_phantom();
  c.snr = std::numeric_limits<double>::infinity();
  c.seed = 42;
  const auto back = phantom::config_from_json(phantom::to_json(c));
  EXPECT_EQ(back.grid, c.grid);
  EXPECT_TRUE(std::isinf(back.snr));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.directions.size(), c.directions.size());
}

TEST(Phantom, EigenvaluesMatchMdAndFa) {
  const Vec3 l = phantom::eigenvalues_for(1e-3, 0.5);
  EXPECT_NEAR(dti::mean_diffusivity(l), 1e-3, 1e-18);
  EXPECT_NEAR(dti::fractional_anisotropy(l), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(l[1], l[2]);
}

TEST(Phantom, HelixAngleIsLinearInDepth) {
  const auto gt = phantom::build_phantom({});
  EXPECT_NEAR(gt.hat_global, -1.2, 1e-12);
  std::size_t mid = 0;
  for (std::size_t j = 0; j < gt.ha_map.size(); ++j) {
    if (!gt.myocardium_mask[j]) continue;
    EXPECT_NEAR(gt.ha_map[j], 60.0 - 120.0 * gt.td_map[j], 1e-9);
    if (std::abs(gt.td_map[j] - 0.5) < 0.02) {
      EXPECT_LT(std::abs(gt.ha_map[j]), 2.5);
      ++mid;
    }
  }
  EXPECT_GT(mid, 0u);
}

TEST(Phantom, TensorsArePositiveDefinite) {
  const auto gt = phantom::build_phantom(test::small_phantom());
  for (std::size_t j = 0; j < gt.tensors.tensors.size(); ++j) {
    if (!gt.myocardium_mask[j]) continue;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(dti::to_matrix(gt.tensors.tensors[j]));
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Phantom, CoilsHaveUnitSumOfSquares) {
  const auto gt = phantom::build_phantom(test::small_phantom());
  const RVector sos = gt.coils.maps.cwiseAbs2().rowwise().sum();
  EXPECT_NEAR(sos.minCoeff(), 1.0, 1e-12);
  EXPECT_NEAR(sos.maxCoeff(), 1.0, 1e-12);
}

TEST(Phantom, PhaseHasUnitMagnitudeAndB0IsUntouched) {
  const auto gt = phantom::build_phantom(test::small_phantom());
  const CMatrix& p = gt.phase.values();
  EXPECT_NEAR((p.cwiseAbs().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((p.col(0).array() - cplx(1.0)).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NE(std::arg(p(p.rows() / 3, 5)), 0.0);
}

TEST(Phantom, IsotropicPhantomHasRankTwoMagnitude) {
  // One b-shell plus b=0: constant isotropic tensors give two distinct columns.
  phantom::PhantomConfig c = test::small_phantom();
  c.fa_true = 0.0;
  const auto gt = phantom::build_phantom(c);
  const RVector s = recon::singular_values(gt.clean_series.data());
  EXPECT_LT(s[2] / s[0], 1e-6);
  EXPECT_GT(s[1] / s[0], 1e-3);
}

TEST(Phantom, BuildIsDeterministic) {
  const auto a = phantom::build_phantom(test::small_phantom());
  const auto b = phantom::build_phantom(test::small_phantom());
  EXPECT_EQ(a.clean_series.data(), b.clean_series.data());
  EXPECT_EQ(a.phase.values(), b.phase.values());
  EXPECT_EQ(a.coils.maps, b.coils.maps);
  const auto n1 = phantom::acquire(a, 3), n2 = phantom::acquire(b, 3);
  EXPECT_EQ(n1.samples, n2.samples);
}

TEST(Phantom, InfiniteSnrAddsNoNoise) {
  phantom::PhantomConfig c = test::small_phantom();
  c.snr = std::numeric_limits<double>::infinity();
  const auto gt = phantom::build_phantom(c);
  const auto data = phantom::acquire(gt, 1);
  const encoding::EncodingModel model{gt.coils, data.mask, std::nullopt};
  EXPECT_EQ(data.samples, encoding::forward(model, gt.phased_series()));
}

TEST(Phantom, NoiseLevelMatchesSnr) {
  const Dims3 d{64, 64, 1};
  CoilMaps coil{d, CMatrix::Ones(static_cast<Eigen::Index>(d.voxels()), 1)};
  const auto mask = encoding::full_mask(d.ny, 1, 1);
  const encoding::EncodingModel model{coil, mask, std::nullopt};
  const CMatrix x = CMatrix::Ones(static_cast<Eigen::Index>(d.voxels()), 1);
  const auto noisy = encoding::add_noise(encoding::forward_data(model, x), encoding::noise_sigma(1.0, 12.0), 11);
  const RVector mag = encoding::adjoint_data(model, noisy).cwiseAbs();
  const double mean = mag.mean();
  const double sd = std::sqrt((mag.array() - mean).square().sum() / static_cast<double>(mag.size() - 1));
  EXPECT_NEAR(mean / sd, 12.0, 1.2);
}

TEST(Phantom, WritesGroundTruthContainers) {
  const auto dir = test::scratch_dir("truth");
  phantom::write_ground_truth(dir, phantom::build_phantom(test::small_phantom()));
  for (const char* name : {"clean_series", "phase", "coils", "tensors", "ha_map", "md_map", "myocardium_mask"})
    EXPECT_TRUE(std::filesystem::exists(dir / name / "header.json")) << name;
  EXPECT_TRUE(std::filesystem::exists(dir / "truth.json"));
}
