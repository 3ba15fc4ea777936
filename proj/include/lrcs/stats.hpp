#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lrcs::stats {

/// |(h_rec - h_ref) / h_ref|. Throws ValidationError when h_ref is zero.
double normalized_bias(double h_ref, double h_rec);

struct BiasSummary {
  std::vector<double> per_subject;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

BiasSummary bias_summary(std::span<const double> ref, std::span<const double> rec);

struct IccResult {
  double r = 0.0;
  double lower = 0.0;  // confidence interval from F-distribution bounds
  double upper = 0.0;
  std::string band;
  double ms_rows = 0.0;
  double ms_cols = 0.0;
  double ms_error = 0.0;
  bool defined = true;
};

/// Qualitative label: Poor (< 0.40), Fair (< 0.60), Good (< 0.75), Excellent.
std::string icc_band(double r);

/// Single-measure absolute-agreement ICC of a two-way model with k = 2 raters.
IccResult icc_absolute_agreement(std::span<const double> ref, std::span<const double> rec, double confidence = 0.95);

struct WilcoxonResult {
  double p = 1.0;
  double w_plus = 0.0;  // sum of ranks of positive differences
  std::size_t n = 0;    // pairs left after dropping zero differences
  bool all_zero = false;
};

/// Exact two-sided signed-rank test on rec - ref, midranks for ties, zero differences dropped.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> ref, std::span<const double> rec);

struct RegionalPmap {
  std::array<double, 16> p{};
  std::array<bool, 16> significant{};
};

/// One Wilcoxon test per AHA segment over subjects; significant when p < alpha.
RegionalPmap regional_pmap(const std::vector<std::array<double, 16>>& ref,
                           const std::vector<std::array<double, 16>>& rec, double alpha = 0.05);

void write_pmap_csv(const std::filesystem::path& path, const RegionalPmap& pmap);

}  // namespace lrcs::stats
