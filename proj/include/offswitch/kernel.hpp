#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <span>
#include <variant>

#include "offswitch/common.hpp"

namespace offswitch {

/// k(a, b) = variance * exp(-|a - b|^2 / (2 lengthscale^2)).
/// A zero variance is accepted and encodes a Dirac prior.
struct SquaredExponential {
  double variance = 1.0;
  double lengthscale = 1.0;

  [[nodiscard]] double operator()(const Act& a, const Act& b) const {
    double r2 = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
      const double d = a[i] - b[i];
      r2 += d * d;
    }
    return variance * std::exp(-0.5 * r2 / (lengthscale * lengthscale));
  }
};

using Kernel = std::variant<SquaredExponential>;

inline void validate(const Kernel& kernel) {
  std::visit(
      [](const SquaredExponential& k) {
        if (!(k.variance >= 0.0) || !std::isfinite(k.variance))
          throw InvalidArgument("kernel variance must be finite and >= 0");
        if (!(k.lengthscale > 0.0) || !std::isfinite(k.lengthscale))
          throw InvalidArgument("kernel lengthscale must be finite and > 0");
      },
      kernel);
}

inline double evaluate(const Kernel& kernel, const Act& a, const Act& b) {
  return std::visit([&](const auto& k) { return k(a, b); }, kernel);
}

/// Prior variance scale of the kernel (k(z, z)).
inline double kernel_variance(const Kernel& kernel) {
  return std::visit([](const SquaredExponential& k) { return k.variance; }, kernel);
}

struct ConstantMean {
  double value = 0.0;
};
using MeanFunction = ConstantMean;

inline double evaluate(const MeanFunction& mean, const Act&) { return mean.value; }

inline Eigen::VectorXd mean_vector(const MeanFunction& mean, std::span<const Act> points) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) m(static_cast<Eigen::Index>(i)) = evaluate(mean, points[i]);
  return m;
}

inline constexpr double kMinJitter = 1e-10;
inline constexpr double kMaxJitter = 1e-6;

/// Covariance between two point sets. The jitter acts as a nugget on
/// coordinate-identical points so that predictions at training acts are
/// consistent with the training Gram matrix.
inline Eigen::MatrixXd cross_covariance(const Kernel& kernel, std::span<const Act> a, std::span<const Act> b,
                                        double jitter) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          evaluate(kernel, a[i], b[j]) + (a[i] == b[j] ? jitter : 0.0);
  return k;
}

/// Prior Gram matrix over a point set, with its Cholesky factor.
class GramMatrix {
 public:
  GramMatrix() = default;

  GramMatrix(const Kernel& kernel, const MeanFunction& mean, std::vector<Act> points)
      : points_(std::move(points)) {
    validate(kernel);
    if (points_.empty()) throw InvalidArgument("gram: point set is empty");
    const std::size_t dim = points_.front().dim();
    for (const auto& p : points_) {
      if (p.dim() != dim) throw InvalidArgument("gram: points of mixed dimension");
      for (double c : p.coords)
        if (!std::isfinite(c)) throw InvalidArgument("gram: non-finite coordinate");
    }
    mean_ = mean_vector(mean, points_);
    const auto n = static_cast<Eigen::Index>(points_.size());
    Eigen::MatrixXd base(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v = evaluate(kernel, points_[static_cast<std::size_t>(i)], points_[static_cast<std::size_t>(j)]);
        base(i, j) = v;
        base(j, i) = v;
      }
    zero_ = base.isZero(0.0);
    for (double jitter = kMinJitter; jitter <= kMaxJitter * 1.0000001; jitter *= 10.0) {
      entries_ = base;
      entries_.diagonal().array() += jitter;
      llt_.compute(entries_);
      if (llt_.info() == Eigen::Success && (llt_.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
        jitter_ = jitter;
        return;
      }
    }
    throw NumericalError("gram: Cholesky failed at maximum jitter " + format_double(kMaxJitter) +
                         "; kernel is ill-conditioned on this point set");
  }

  [[nodiscard]] const std::vector<Act>& points() const { return points_; }
  [[nodiscard]] const Eigen::MatrixXd& entries() const { return entries_; }
  [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
  [[nodiscard]] double jitter() const { return jitter_; }
  [[nodiscard]] Eigen::Index size() const { return entries_.rows(); }
  [[nodiscard]] const Eigen::LLT<Eigen::MatrixXd>& cholesky() const { return llt_; }
  [[nodiscard]] Eigen::MatrixXd lower() const { return llt_.matrixL(); }
  /// True when the kernel vanishes on the point set (before jitter).
  [[nodiscard]] bool is_zero() const { return zero_; }

  template <typename Derived>
  [[nodiscard]] typename Derived::PlainObject solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return llt_.solve(rhs);
  }

 private:
  std::vector<Act> points_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd entries_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
  bool zero_ = false;
};

inline GramMatrix gram(const Kernel& kernel, const MeanFunction& mean, std::vector<Act> points) {
  return GramMatrix(kernel, mean, std::move(points));
}

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

/// Draw from N(mean, cov). A vanishing covariance returns the mean exactly.
inline Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const GramMatrix& cov, Rng& rng) {
  if (mean.size() != cov.size()) throw InvalidArgument("mvn_sample: dimension mismatch");
  if (cov.is_zero()) return mean;
  return mean + cov.cholesky().matrixL() * standard_normal_vector(mean.size(), rng);
}

}  // namespace offswitch
