#ifndef EBLR_METRICS_HPP
#define EBLR_METRICS_HPP

#include <Eigen/Dense>

#include "eblr/error.hpp"

namespace eblr {

namespace detail {

template <typename A, typename B>
void check_lengths(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
  if (y.size() != yhat.size()) throw MetricError("target and forecast lengths differ");
  if (y.size() == 0) throw MetricError("metric over an empty vector is undefined");
}

}  // namespace detail

// sqrt(mean((yhat - y)^2)) / mean(|y|)
template <typename A, typename B>
typename A::Scalar nrmse(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
  detail::check_lengths(y, yhat);
  const auto scale = y.cwiseAbs().mean();
  if (!(scale > 0)) throw MetricError("NRMSE is undefined when mean |y| is 0");
  using std::sqrt;
  return sqrt((yhat - y).squaredNorm() / static_cast<typename A::Scalar>(y.size())) / scale;
}

// sum|yhat - y| / sum|y|
template <typename A, typename B>
typename A::Scalar nd(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
  detail::check_lengths(y, yhat);
  const auto scale = y.cwiseAbs().sum();
  if (!(scale > 0)) throw MetricError("ND is undefined when sum |y| is 0");
  return (yhat - y).cwiseAbs().sum() / scale;
}

// Weighted scaled pinball loss at quantile level rho:
// sum max(rho (y - q), (1 - rho)(q - y)) / sum|y|
template <typename A, typename B>
typename A::Scalar wspl(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat_rho,
                        typename A::Scalar rho) {
  detail::check_lengths(y, yhat_rho);
  if (!(rho > 0 && rho < 1)) throw DomainError("quantile level must lie in (0, 1)");
  const auto scale = y.cwiseAbs().sum();
  if (!(scale > 0)) throw MetricError("WSPL is undefined when sum |y| is 0");
  const auto diff = (y - yhat_rho).array();
  return (rho * diff).max((rho - 1) * diff).sum() / scale;
}

}  // namespace eblr

#endif  // EBLR_METRICS_HPP
