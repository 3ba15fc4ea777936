#include "lrcs/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>

#include "lrcs/types.hpp"

namespace lrcs::stats {

namespace {

void check_pairs(std::span<const double> ref, std::span<const double> rec) {
  if (ref.size() != rec.size()) throw ValidationError("paired measurements differ in length");
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (!std::isfinite(ref[i]) || !std::isfinite(rec[i])) throw ValidationError("paired measurements must be finite");
}

double f_quantile(double d1, double d2, double q) {
  return boost::math::quantile(boost::math::fisher_f_distribution<double>(d1, d2), q);
}

}  // namespace

double normalized_bias(double h_ref, double h_rec) {
  if (h_ref == 0.0) throw ValidationError("normalized bias is undefined for a zero reference");
  return std::abs((h_rec - h_ref) / h_ref);
}

BiasSummary bias_summary(std::span<const double> ref, std::span<const double> rec) {
  check_pairs(ref, rec);
  BiasSummary s;
  for (std::size_t i = 0; i < ref.size(); ++i) s.per_subject.push_back(normalized_bias(ref[i], rec[i]));
  const double n = static_cast<double>(s.per_subject.size());
  if (s.per_subject.empty()) return s;
  s.mean = std::accumulate(s.per_subject.begin(), s.per_subject.end(), 0.0) / n;
  if (s.per_subject.size() > 1) {
    double ss = 0.0;
    for (double b : s.per_subject) ss += (b - s.mean) * (b - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::string icc_band(double r) {
  if (std::isnan(r)) return "Undefined";
  if (r < 0.40) return "Poor";
  if (r < 0.60) return "Fair";
  if (r < 0.75) return "Good";
  return "Excellent";
}

IccResult icc_absolute_agreement(std::span<const double> ref, std::span<const double> rec, double confidence) {
  check_pairs(ref, rec);
  const std::size_t n_subjects = ref.size();
  if (n_subjects < 3) throw ValidationError("ICC needs at least 3 subjects");
  const double n = static_cast<double>(n_subjects), k = 2.0;

  double grand = 0.0;
  for (std::size_t i = 0; i < n_subjects; ++i) grand += ref[i] + rec[i];
  grand /= n * k;
  const double col_ref = std::accumulate(ref.begin(), ref.end(), 0.0) / n;
  const double col_rec = std::accumulate(rec.begin(), rec.end(), 0.0) / n;
  double ss_rows = 0.0, ss_total = 0.0;
  for (std::size_t i = 0; i < n_subjects; ++i) {
    const double row = 0.5 * (ref[i] + rec[i]);
    ss_rows += k * (row - grand) * (row - grand);
    ss_total += (ref[i] - grand) * (ref[i] - grand) + (rec[i] - grand) * (rec[i] - grand);
  }
  const double ss_cols = n * ((col_ref - grand) * (col_ref - grand) + (col_rec - grand) * (col_rec - grand));
  const double ss_error = std::max(0.0, ss_total - ss_rows - ss_cols);

  IccResult out;
  out.ms_rows = ss_rows / (n - 1.0);
  out.ms_cols = ss_cols / (k - 1.0);
  out.ms_error = ss_error / ((n - 1.0) * (k - 1.0));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (ss_total == 0.0) {
    out.defined = false;
    out.r = out.lower = out.upper = nan;
    out.band = icc_band(nan);
    return out;
  }
  const double msr = out.ms_rows, msc = out.ms_cols, mse = out.ms_error;
  out.r = (msr - mse) / (msr + (k - 1.0) * mse + (k / n) * (msc - mse));
  out.band = icc_band(out.r);

  if (out.r >= 1.0) {
    out.lower = out.upper = 1.0;
    return out;
  }
  const double a = k * out.r / (n * (1.0 - out.r));
  const double b = 1.0 + k * out.r * (n - 1.0) / (n * (1.0 - out.r));
  const double num = (a * msc + b * mse) * (a * msc + b * mse);
  const double den = (a * msc) * (a * msc) / (k - 1.0) + (b * mse) * (b * mse) / ((n - 1.0) * (k - 1.0));
  const double v = num / den;
  const double q = 1.0 - 0.5 * (1.0 - confidence);
  if (!(v > 0.0) || !std::isfinite(v)) {
    out.lower = out.upper = nan;
    return out;
  }
  const double f_hi = f_quantile(n - 1.0, v, q);
  const double f_lo = f_quantile(v, n - 1.0, q);
  const double c = k * msc + (k * n - k - n) * mse;
  out.lower = n * (msr - f_hi * mse) / (f_hi * c + n * msr);
  out.upper = n * (f_lo * msr - mse) / (c + n * f_lo * msr);
  return out;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> ref, std::span<const double> rec) {
  check_pairs(ref, rec);
  std::vector<double> diffs;
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (rec[i] - ref[i] != 0.0) diffs.push_back(rec[i] - ref[i]);
  WilcoxonResult out;
  out.n = diffs.size();
  if (diffs.empty()) {
    out.all_zero = true;
    out.p = 1.0;
    return out;
  }

  // Doubled midranks are integers, so the null distribution of 2W+ is a
  // count over integer sums of all 2^n sign assignments.
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  std::vector<long> rank2(diffs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const long doubled = static_cast<long>(i + 1 + j + 1);  // 2 * mean of ranks i+1..j+1
    for (std::size_t t = i; t <= j; ++t) rank2[order[t]] = doubled;
    i = j + 1;
  }
  long observed = 0, total = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    total += rank2[i];
    if (diffs[i] > 0.0) observed += rank2[i];
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long r : rank2) {
    for (long s = reach; s >= 0; --s)
      if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
    reach += r;
  }
  const double all = std::ldexp(1.0, static_cast<int>(diffs.size()));
  double upper = 0.0, lower = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s >= observed) upper += count[static_cast<std::size_t>(s)];
    if (s <= observed) lower += count[static_cast<std::size_t>(s)];
  }
  out.w_plus = 0.5 * static_cast<double>(observed);
  out.p = std::min(1.0, 2.0 * std::min(upper, lower) / all);
  return out;
}

RegionalPmap regional_pmap(const std::vector<std::array<double, 16>>& ref,
                           const std::vector<std::array<double, 16>>& rec, double alpha) {
  if (ref.size() != rec.size() || ref.empty()) throw ValidationError("regional p-map needs the same non-empty subject roster");
  RegionalPmap out;
  for (std::size_t s = 0; s < 16; ++s) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (!std::isfinite(ref[i][s]) || !std::isfinite(rec[i][s]))
        throw ValidationError("missing data for segment " + std::to_string(s + 1) + " of subject " + std::to_string(i));
      a.push_back(ref[i][s]);
      b.push_back(rec[i][s]);
    }
    out.p[s] = wilcoxon_signed_rank(a, b).p;
    out.significant[s] = out.p[s] < alpha;
  }
  return out;
}

void write_pmap_csv(const std::filesystem::path& path, const RegionalPmap& pmap) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "segment,p,significant\n";
  out.precision(10);
  for (std::size_t s = 0; s < 16; ++s) out << s + 1 << ',' << pmap.p[s] << ',' << (pmap.significant[s] ? 1 : 0) << '\n';
}

}  // namespace lrcs::stats
