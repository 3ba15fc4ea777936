#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "lrcs/stats.hpp"
#include "test_util.hpp"

using namespace lrcs;

namespace {

// Two-way ANOVA coded from the cell-deviation decomposition.
double icc_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) y.row(static_cast<Eigen::Index>(i)) << a[i], b[i];
  const double g = y.mean();
  const Eigen::VectorXd rm = y.rowwise().mean();
  const Eigen::RowVectorXd cm = y.colwise().mean();
  double sse = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double e = y(i, j) - rm[i] - cm[j] + g;
      sse += e * e;
    }
  const double msr = 2.0 * (rm.array() - g).square().sum() / static_cast<double>(n - 1);
  const double msc = static_cast<double>(n) * (cm.array() - g).square().sum();
  const double mse = sse / static_cast<double>(n - 1);
  return (msr - mse) / (msr + mse + 2.0 / static_cast<double>(n) * (msc - mse));
}

// Two-sided exact p by enumerating every sign assignment of the midranks.
double wilcoxon_oracle(const std::vector<double>& d) {
  std::vector<double> nz;
  for (double v : d)
    if (v != 0.0) nz.push_back(v);
  const std::size_t n = nz.size();
  if (n == 0) return 1.0;
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(nz[j]) < std::abs(nz[i])) less += 1.0;
      if (std::abs(nz[j]) == std::abs(nz[i])) equal += 1.0;
    }
    ranks[i] = less + (equal + 1.0) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) observed += ranks[i];
  double hi = 0.0, lo = 0.0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t m = 0; m < total; ++m) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (m >> i & 1u) w += ranks[i];
    if (w >= observed - 1e-9) hi += 1.0;
    if (w <= observed + 1e-9) lo += 1.0;
  }
  return std::min(1.0, 2.0 * std::min(hi, lo) / static_cast<double>(total));
}

}  // namespace

TEST(Bias, Examples) {
  EXPECT_EQ(stats::normalized_bias(-1.01, -1.01), 0.0);
  EXPECT_NEAR(stats::normalized_bias(-1.01, -1.02), 0.0099, 5e-5);
  EXPECT_NEAR(stats::normalized_bias(-1.01, -0.06), 0.9406, 5e-5);
  EXPECT_THROW(stats::normalized_bias(0.0, 1.0), ValidationError);
}

TEST(Bias, Summary) {
  const std::vector<double> ref{1.0, 2.0, 4.0}, rec{1.1, 1.8, 4.0};
  const auto s = stats::bias_summary(ref, rec);
  EXPECT_NEAR(s.mean, (0.1 + 0.1 + 0.0) / 3.0, 1e-12);
  EXPECT_NEAR(s.stddev, std::sqrt((2.0 * std::pow(0.1 - s.mean, 2) + s.mean * s.mean) / 2.0), 1e-12);
}

TEST(Icc, Bands) {
  EXPECT_EQ(stats::icc_band(0.2), "Poor");
  EXPECT_EQ(stats::icc_band(0.40), "Fair");
  EXPECT_EQ(stats::icc_band(0.60), "Good");
  EXPECT_EQ(stats::icc_band(0.75), "Excellent");
  EXPECT_EQ(stats::icc_band(std::nan("")), "Undefined");
}

TEST(Icc, PerfectAgreement) {
  const std::vector<double> ref{-1.0, -1.2, -0.8, -1.1, -0.9};
  const auto r = stats::icc_absolute_agreement(ref, ref);
  EXPECT_DOUBLE_EQ(r.r, 1.0);
  EXPECT_EQ(r.band, "Excellent");
}

TEST(Icc, ShuffledIsPoor) {
  const std::vector<double> ref{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
  const std::vector<double> rec{4.0, 7.0, 1.0, 6.0, 2.0, 5.0, 3.0};
  const auto r = stats::icc_absolute_agreement(ref, rec);
  EXPECT_NEAR(r.r, icc_oracle(ref, rec), 1e-12);
  EXPECT_LT(r.r, 0.4);
  EXPECT_EQ(r.band, "Poor");
}

TEST(Icc, MatchesAnovaOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 3 + static_cast<std::size_t>(t % 8);
    std::vector<double> a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = n(rng);
      b[i] = a[i] * (0.5 + 0.05 * t) + 0.3 * n(rng) + 0.1;
    }
    const auto r = stats::icc_absolute_agreement(a, b);
    EXPECT_NEAR(r.r, icc_oracle(a, b), 1e-12);
    if (r.r < 1.0 && std::isfinite(r.lower)) {
      EXPECT_LE(r.lower, r.r);
      EXPECT_GE(r.upper, r.r);
    }
  }
}

TEST(Icc, DegenerateInputs) {
  const std::vector<double> two{1.0, 2.0};
  EXPECT_THROW(stats::icc_absolute_agreement(two, two), ValidationError);
  const std::vector<double> flat{1.0, 1.0, 1.0};
  const auto r = stats::icc_absolute_agreement(flat, flat);
  EXPECT_FALSE(r.defined);
  EXPECT_EQ(r.band, "Undefined");
}

TEST(Wilcoxon, UnanimousSigns) {
  std::vector<double> ref(6, 0.0), rec{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  EXPECT_DOUBLE_EQ(stats::wilcoxon_signed_rank(ref, rec).p, 0.03125);
  std::vector<double> ref7(7, 0.0), rec7{-0.1, -0.2, -0.3, -0.4, -0.5, -0.6, -0.7};
  EXPECT_DOUBLE_EQ(stats::wilcoxon_signed_rank(ref7, rec7).p, 0.015625);
}

TEST(Wilcoxon, BalancedDifferences) {
  const std::vector<double> ref(4, 0.0), rec{1.0, -1.0, 2.0, -2.0};
  EXPECT_DOUBLE_EQ(stats::wilcoxon_signed_rank(ref, rec).p, 1.0);
  const auto z = stats::wilcoxon_signed_rank(ref, ref);
  EXPECT_TRUE(z.all_zero);
  EXPECT_DOUBLE_EQ(z.p, 1.0);
}

TEST(Wilcoxon, MatchesEnumeration) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> tie(-4, 4);
  std::normal_distribution<double> n(0.3, 1.0);
  for (std::size_t len = 1; len <= 10; ++len)
    for (int t = 0; t < 20; ++t) {
      std::vector<double> ref(len, 0.0), rec(len);
      for (auto& v : rec) v = t % 2 ? static_cast<double>(tie(rng)) : n(rng);
      std::vector<double> d(len);
      for (std::size_t i = 0; i < len; ++i) d[i] = rec[i] - ref[i];
      EXPECT_NEAR(stats::wilcoxon_signed_rank(ref, rec).p, wilcoxon_oracle(d), 1e-12) << "n=" << len;
    }
}

TEST(Pmap, IdenticalDataIsNotSignificant) {
  std::vector<std::array<double, 16>> ref(7);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t s = 0; s < 16; ++s) ref[i][s] = static_cast<double>(i) + 0.1 * static_cast<double>(s);
  const auto p = stats::regional_pmap(ref, ref);
  for (bool sig : p.significant) EXPECT_FALSE(sig);
}

TEST(Pmap, BiasedSegmentIsFlagged) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::array<double, 16>> ref(7), rec(7);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t s = 0; s < 16; ++s) {
      ref[i][s] = n(rng);
      rec[i][s] = ref[i][s] + (s == 4 ? 0.5 + 0.01 * static_cast<double>(i) : (i % 2 ? 0.1 : -0.1) * (1.0 + 0.1 * static_cast<double>(i)));
    }
  const auto p = stats::regional_pmap(ref, rec);
  EXPECT_NEAR(p.p[4], 0.015625, 1e-12);
  EXPECT_TRUE(p.significant[4]);
  for (std::size_t s = 0; s < 16; ++s)
    if (s != 4) EXPECT_FALSE(p.significant[s]);
}

TEST(Pmap, CsvHasSixteenRows) {
  const auto dir = test::scratch_dir("pmap");
  stats::RegionalPmap p;
  p.p.fill(0.5);
  stats::write_pmap_csv(dir / "p.csv", p);
  std::ifstream in(dir / "p.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 16);
}

TEST(Pmap, MissingSegmentIsRejected) {
  std::vector<std::array<double, 16>> ref(3), rec(3);
  for (auto& r : ref) r.fill(1.0);
  rec = ref;
  rec[1][3] = std::nan("");
  EXPECT_THROW(stats::regional_pmap(ref, rec), ValidationError);
}
