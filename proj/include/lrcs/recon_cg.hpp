#pragma once

#include <cmath>
#include <sstream>

namespace lrcs::recon {

namespace detail {

inline double inner_real(const CMatrix& a, const CMatrix& b) {
  return Eigen::Map<const CVector>(a.data(), a.size()).dot(Eigen::Map<const CVector>(b.data(), b.size())).real();
}

void dump_iterate(const std::filesystem::path& dir, const CMatrix& x);

}  // namespace detail

template <class Op>
CgStats conjugate_gradient(const Op& h, const CMatrix& b, CMatrix& x, int max_iters, double tol,
                           const std::optional<std::filesystem::path>& dump_dir) {
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero(b.rows(), b.cols());
    return {0, 0.0};
  }
  if (x.rows() != b.rows() || x.cols() != b.cols()) x.setZero(b.rows(), b.cols());
  CMatrix r = b - h(x);
  CMatrix p = r;
  double rr = detail::inner_real(r, r);
  const double r0 = std::sqrt(rr);
  if (!std::isfinite(r0)) throw NumericalError("conjugate gradient started from a non-finite residual");
  std::vector<double> history{r0 / bnorm};
  int rising = 0;
  CgStats stats{0, r0 / bnorm};
  for (int it = 0; it < max_iters && stats.rel_residual > tol; ++it) {
    const CMatrix hp = h(p);
    const double php = detail::inner_real(p, hp);
    if (!(php > 0.0)) break;  // exact convergence in the range of h
    const double a = rr / php;
    x += a * p;
    r -= a * hp;
    const double rr_new = detail::inner_real(r, r);
    if (!std::isfinite(rr_new)) {
      if (dump_dir) detail::dump_iterate(*dump_dir, x);
      throw NumericalError("conjugate gradient produced a non-finite residual");
    }
    const double rel = std::sqrt(rr_new) / bnorm;
    rising = rel > stats.rel_residual ? rising + 1 : 0;
    history.push_back(rel);
    stats = {it + 1, rel};
    if (rising >= 3 && std::sqrt(rr_new) > 10.0 * r0) {
      if (dump_dir) detail::dump_iterate(*dump_dir, x);
      std::ostringstream msg;
      msg << "conjugate gradient diverged; relative residuals:";
      for (double v : history) msg << ' ' << v;
      throw NumericalError(msg.str());
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return stats;
}

}  // namespace lrcs::recon
