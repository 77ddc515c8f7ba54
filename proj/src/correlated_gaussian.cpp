#include "qref/correlated_gaussian.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "qref/errors.hpp"

namespace qref {

complex CorrelatedGaussian::operator()(const Eigen::VectorXd& y) const {
  const Eigen::VectorXcd d = (y - centre).cast<complex>();
  const complex quad = d.transpose() * precision * d;
  return prefactor * std::exp(-0.5 * quad + complex(0.0, momentum.dot(y)));
}

CorrelatedGaussian CorrelatedGaussian::from_packets(
    std::span<const GaussianPacket> packets) {
  const auto n = static_cast<Eigen::Index>(packets.size());
  CorrelatedGaussian g;
  g.precision = Eigen::MatrixXcd::Zero(n, n);
  g.centre.resize(n);
  g.momentum.resize(n);
  double phase = 0.0;
  double norm = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = packets[static_cast<std::size_t>(i)];
    g.precision(i, i) = 1.0 / p.width();
    g.centre(i) = p.centre();
    g.momentum(i) = p.momentum();
    phase += p.phase();
    norm *= p.norm_constant();
  }
  g.prefactor = std::polar(norm, phase);
  return g;
}

CorrelatedGaussian CorrelatedGaussian::transformed(const Eigen::MatrixXd& A) const {
  const Eigen::MatrixXd inv = A.inverse();
  const Eigen::MatrixXcd inv_c = inv.cast<complex>();
  CorrelatedGaussian g;
  g.precision = inv_c.transpose() * precision * inv_c;
  g.precision = 0.5 * (g.precision + g.precision.transpose()).eval();
  g.centre = A * centre;
  g.momentum = inv.transpose() * momentum;
  g.prefactor = prefactor / std::sqrt(std::abs(A.determinant()));
  return g;
}

GaussianExponent::GaussianExponent(Eigen::Index size)
    : quad_(Eigen::MatrixXcd::Zero(size, size)),
      linear_(Eigen::VectorXcd::Zero(size)) {}

void GaussianExponent::add(const CorrelatedGaussian& g,
                           std::span<const Eigen::Index> slots, bool conjugate) {
  const auto n = static_cast<Eigen::Index>(g.size());
  if (static_cast<Eigen::Index>(slots.size()) != n) {
    throw ContractError("slot count does not match Gaussian dimension");
  }
  const Eigen::MatrixXcd P = conjugate ? Eigen::MatrixXcd(g.precision.conjugate())
                                       : g.precision;
  const Eigen::VectorXcd mu = g.centre.cast<complex>();
  const Eigen::VectorXcd lin =
      P * mu + complex(0.0, conjugate ? -1.0 : 1.0) * g.momentum.cast<complex>();
  for (Eigen::Index i = 0; i < n; ++i) {
    linear_(slots[i]) += lin(i);
    for (Eigen::Index j = 0; j < n; ++j) quad_(slots[i], slots[j]) += P(i, j);
  }
  const complex muPmu = mu.transpose() * P * mu;
  constant_ += -0.5 * muPmu;
  scale_ *= conjugate ? std::conj(g.prefactor) : g.prefactor;
}

void GaussianExponent::add_quadratic(const Eigen::MatrixXcd& quad,
                                     const Eigen::VectorXcd& linear, complex constant,
                                     std::span<const Eigen::Index> slots) {
  const auto n = static_cast<Eigen::Index>(slots.size());
  if (quad.rows() != n || quad.cols() != n || linear.size() != n) {
    throw ContractError("slot count does not match quadratic form");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    linear_(slots[i]) += linear(i);
    for (Eigen::Index j = 0; j < n; ++j) quad_(slots[i], slots[j]) += quad(i, j);
  }
  constant_ += constant;
}

namespace {

// sqrt(det Q) as a product of principal roots of the unpivoted LDL^T pivots.
// For complex symmetric Q with positive definite real part every Schur
// complement keeps that property, so each pivot has Re > 0 and the product
// selects the branch continuous from the real case.
complex sqrt_det(const Eigen::MatrixXcd& quad) {
  const Eigen::Index n = quad.rows();
  Eigen::MatrixXcd work = quad;
  complex root = 1.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const complex pivot = work(k, k);
    if (!(pivot.real() > 0.0)) {
      throw DomainError("Gaussian exponent is not integrable");
    }
    root *= std::sqrt(pivot);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const complex f = work(i, k) / pivot;
      for (Eigen::Index j = k + 1; j < n; ++j) work(i, j) -= f * work(k, j);
    }
  }
  return root;
}

}  // namespace

complex GaussianExponent::integrate() const {
  const Eigen::Index n = quad_.rows();
  const complex root = sqrt_det(quad_);
  const Eigen::VectorXcd solved = quad_.partialPivLu().solve(linear_);
  const complex stationary = (linear_.transpose() * solved)(0, 0);
  const double two_pi_pow = std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(n));
  return scale_ * two_pi_pow / root * std::exp(0.5 * stationary + constant_);
}

GaussianExponent GaussianExponent::marginal(Eigen::Index keep) const {
  const Eigen::Index n = quad_.rows();
  const Eigen::Index m = n - keep;
  if (keep < 0 || m < 0) throw ContractError("cannot keep more variables than exist");
  GaussianExponent out(keep);
  out.scale_ = scale_;
  out.constant_ = constant_;
  if (m == 0) {
    out.quad_ = quad_;
    out.linear_ = linear_;
    return out;
  }
  const Eigen::MatrixXcd qyy = quad_.bottomRightCorner(m, m);
  const Eigen::MatrixXcd qxy = quad_.topRightCorner(keep, m);
  const auto lu = qyy.partialPivLu();
  const Eigen::VectorXcd by = linear_.tail(m);
  const Eigen::VectorXcd solved_b = lu.solve(by);
  const Eigen::MatrixXcd solved_q = lu.solve(Eigen::MatrixXcd(qxy.transpose()));
  out.quad_ = quad_.topLeftCorner(keep, keep) - qxy * solved_q;
  out.quad_ = 0.5 * (out.quad_ + out.quad_.transpose()).eval();
  out.linear_ = linear_.head(keep) - qxy * solved_b;
  out.constant_ += 0.5 * (by.transpose() * solved_b)(0, 0);
  out.scale_ *= std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(m)) / sqrt_det(qyy);
  return out;
}

CorrelatedGaussian CorrelatedGaussian::recentred(const Eigen::VectorXd& origin) const {
  CorrelatedGaussian out = *this;
  out.centre -= origin;
  out.prefactor *= std::polar(1.0, momentum.dot(origin));
  return out;
}

complex overlap(const CorrelatedGaussian& g1, const CorrelatedGaussian& g2) {
  if (g1.size() != g2.size()) throw ContractError("dimension mismatch in overlap");
  const Eigen::VectorXd mid = 0.5 * (g1.centre + g2.centre);
  const auto n = static_cast<Eigen::Index>(g1.size());
  std::vector<Eigen::Index> slots(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) slots[static_cast<std::size_t>(i)] = i;
  GaussianExponent e(n);
  e.add(g1.recentred(mid), slots, true);
  e.add(g2.recentred(mid), slots, false);
  return e.integrate();
}

}  // namespace qref
