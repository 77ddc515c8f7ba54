// Multivariate complex Gaussians
//   f(y) = prefactor * exp(-1/2 (y - mu)^T P (y - mu) + i k . y)
// with complex symmetric precision P (Re P positive definite), plus the
// Gaussian integral needed for overlaps and partial-trace norms of
// correlated (non-product) states.
#pragma once

#include <complex>
#include <span>

#include <Eigen/Dense>

#include "qref/packets.hpp"

namespace qref {

struct CorrelatedGaussian {
  Eigen::MatrixXcd precision;
  Eigen::VectorXd centre;
  Eigen::VectorXd momentum;
  complex prefactor = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(centre.size()); }
  complex operator()(const Eigen::VectorXd& y) const;

  /// Product of normalized packets, one variable per packet.
  static CorrelatedGaussian from_packets(std::span<const GaussianPacket> packets);

  /// The same wavefunction written in y = A x, rescaled by |det A|^(-1/2) so
  /// the L2 norm is unchanged.
  CorrelatedGaussian transformed(const Eigen::MatrixXd& A) const;

  /// The same function written in z = y - origin.
  CorrelatedGaussian recentred(const Eigen::VectorXd& origin) const;
};

/// Exponent -1/2 z^T Q z + b^T z + c over `size` variables, with an extra
/// multiplicative scale kept outside the exponent.
class GaussianExponent {
 public:
  explicit GaussianExponent(Eigen::Index size);

  /// Adds log f (or log conj f) with f's variables placed at `slots`.
  void add(const CorrelatedGaussian& g, std::span<const Eigen::Index> slots,
           bool conjugate);

  /// Adds -1/2 z_s^T Q z_s + b^T z_s + c on the variables at `slots`.
  void add_quadratic(const Eigen::MatrixXcd& quad, const Eigen::VectorXcd& linear,
                     complex constant, std::span<const Eigen::Index> slots);

  /// Integral over all of R^n. Throws DomainError if Re Q is not positive
  /// definite.
  complex integrate() const;

  /// Integrates out every variable after the first `keep`; the result lives
  /// on those leading variables.
  GaussianExponent marginal(Eigen::Index keep) const;

  Eigen::Index size() const { return quad_.rows(); }
  const Eigen::MatrixXcd& quad() const { return quad_; }
  const Eigen::VectorXcd& linear() const { return linear_; }
  complex constant() const { return constant_; }
  complex scale() const { return scale_; }

 private:
  Eigen::MatrixXcd quad_;
  Eigen::VectorXcd linear_;
  complex constant_ = 0.0;
  complex scale_ = 1.0;
};

/// <g1|g2>
complex overlap(const CorrelatedGaussian& g1, const CorrelatedGaussian& g2);

}  // namespace qref
