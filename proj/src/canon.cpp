#include "qref/canon.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qref/errors.hpp"

namespace qref {

namespace {

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double c) { return c == 0.0; });
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ContractError(std::string(what) + " must be square and non-empty");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw DomainError(std::string(what) + " is singular");
  return lu.inverse();
}

std::string relative_label(std::size_t k) { return "r" + std::to_string(k + 1); }

}  // namespace

LinearPhaseSpaceForm LinearPhaseSpaceForm::position(std::vector<double> coeffs,
                                                    std::string label) {
  std::vector<double> zeros(coeffs.size(), 0.0);
  return {std::move(coeffs), std::move(zeros), std::move(label)};
}

LinearPhaseSpaceForm LinearPhaseSpaceForm::momentum(std::vector<double> coeffs,
                                                    std::string label) {
  std::vector<double> zeros(coeffs.size(), 0.0);
  return {std::move(zeros), std::move(coeffs), std::move(label)};
}

bool LinearPhaseSpaceForm::is_position_only() const { return all_zero(p_coeffs); }
bool LinearPhaseSpaceForm::is_momentum_only() const { return all_zero(x_coeffs); }

complex commutator(const LinearPhaseSpaceForm& f, const LinearPhaseSpaceForm& g) {
  const std::size_t n = f.x_coeffs.size();
  if (f.p_coeffs.size() != n || g.x_coeffs.size() != n || g.p_coeffs.size() != n) {
    throw ContractError("commutator of forms with different dimensions");
  }
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    value += f.x_coeffs[i] * g.p_coeffs[i] - g.x_coeffs[i] * f.p_coeffs[i];
  }
  return {0.0, value};
}

LinearCoordinateMap::LinearCoordinateMap(Eigen::MatrixXd position,
                                         std::optional<Eigen::MatrixXd> momentum,
                                         std::vector<std::string> labels)
    : position_(std::move(position)),
      momentum_(std::move(momentum)),
      labels_(std::move(labels)) {
  checked_inverse(position_, "position matrix");
  if (momentum_ && (momentum_->rows() != position_.rows() ||
                    momentum_->cols() != position_.cols())) {
    throw ContractError("momentum matrix shape differs from position matrix");
  }
  if (labels_.empty()) {
    for (Eigen::Index i = 0; i < position_.rows(); ++i) {
      labels_.push_back("y" + std::to_string(i + 1));
    }
  } else if (static_cast<Eigen::Index>(labels_.size()) != position_.rows()) {
    throw ContractError("one label per coordinate is required");
  }
  if (momentum_) {
    const Eigen::MatrixXd product = position_ * momentum_->transpose();
    const double scale = std::max(1.0, position_.norm() * momentum_->norm());
    const auto n = position_.rows();
    canonical_ = (product - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <=
                 1e-12 * scale;
  }
}

LinearPhaseSpaceForm LinearCoordinateMap::position_form(std::size_t row) const {
  const auto r = static_cast<Eigen::Index>(row);
  if (r >= position_.rows()) throw ContractError("row out of range");
  return LinearPhaseSpaceForm::position(to_std(position_.row(r).transpose()),
                                        "x_" + labels_[row]);
}

LinearPhaseSpaceForm LinearCoordinateMap::momentum_form(std::size_t row) const {
  if (!momentum_) throw ContractError("map has no momentum rows attached");
  const auto r = static_cast<Eigen::Index>(row);
  if (r >= momentum_->rows()) throw ContractError("row out of range");
  return LinearPhaseSpaceForm::momentum(to_std(momentum_->row(r).transpose()),
                                        "p_" + labels_[row]);
}

Eigen::MatrixXd LinearCoordinateMap::conjugate_of_position() const {
  return checked_inverse(position_, "position matrix").transpose();
}

LinearCoordinateMap cm_relative_map(const MassConfig& masses, std::size_t observer) {
  const std::size_t n = masses.size();
  if (n < 2) throw ContractError("centre-of-mass map needs at least two particles");
  if (observer >= n) throw ContractError("observer index out of range");
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  const double total = masses.total();
  for (Eigen::Index i = 0; i < N; ++i) A(0, i) = masses[static_cast<std::size_t>(i)] / total;
  std::vector<std::string> labels{"cm"};
  Eigen::Index row = 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == observer) continue;
    A(row, static_cast<Eigen::Index>(k)) = 1.0;
    A(row, static_cast<Eigen::Index>(observer)) = -1.0;
    labels.push_back(relative_label(k));
    ++row;
  }
  return LinearCoordinateMap(std::move(A), std::nullopt, std::move(labels));
}

std::vector<LinearPhaseSpaceForm> relative_momentum_forms(const MassConfig& masses,
                                                          std::size_t observer) {
  const std::size_t n = masses.size();
  if (n < 2) throw ContractError("relative momenta need at least two particles");
  if (observer >= n) throw ContractError("observer index out of range");
  std::vector<LinearPhaseSpaceForm> forms;
  forms.push_back(LinearPhaseSpaceForm::momentum(std::vector<double>(n, 1.0), "p_cm"));
  const double mo = masses[observer];
  for (std::size_t k = 0; k < n; ++k) {
    if (k == observer) continue;
    const double mu = masses.reduced(observer, k);
    std::vector<double> c(n, 0.0);
    c[k] = mu / masses[k];
    c[observer] = -mu / mo;
    forms.push_back(LinearPhaseSpaceForm::momentum(std::move(c), "p_" + relative_label(k)));
  }
  return forms;
}

Eigen::MatrixXd physical_momentum_matrix(const MassConfig& masses, std::size_t observer) {
  const auto forms = relative_momentum_forms(masses, observer);
  const auto n = static_cast<Eigen::Index>(masses.size());
  Eigen::MatrixXd B(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    B.row(r) = to_vector(forms[static_cast<std::size_t>(r)].p_coeffs).transpose();
  }
  return B;
}

LinearCoordinateMap conjugate_momenta(const LinearCoordinateMap& map) {
  Eigen::MatrixXd B = checked_inverse(map.position_matrix(), "position matrix").transpose();
  return LinearCoordinateMap(map.position_matrix(), std::move(B), map.labels());
}

LinearCoordinateMap conjugate_positions(const Eigen::MatrixXd& momentum_rows,
                                        std::vector<std::string> labels) {
  Eigen::MatrixXd A = checked_inverse(momentum_rows, "momentum matrix").transpose();
  return LinearCoordinateMap(std::move(A), momentum_rows, std::move(labels));
}

double gamma_mass(const MassConfig& masses) {
  if (masses.size() != 3) throw ContractError("gamma_mass is defined for three particles");
  return masses[0] * masses[1] * masses[2] /
         (masses.total() * masses.reduced(0, 1) * masses.reduced(0, 2));
}

LinearPhaseSpaceForm transform_form(const LinearPhaseSpaceForm& form,
                                    const LinearCoordinateMap& map) {
  if (form.size() != map.size() || form.p_coeffs.size() != map.size()) {
    throw ContractError("form dimension does not match map");
  }
  const Eigen::MatrixXd& A = map.position_matrix();
  const Eigen::VectorXd x = map.conjugate_of_position() * to_vector(form.x_coeffs);
  const Eigen::VectorXd p = A * to_vector(form.p_coeffs);
  return {to_std(x), to_std(p), form.label};
}

ExactTransformReport exact_two_body_report(double m1, double m2, double d1sq,
                                           double d2sq, double a, double b) {
  if (!(m1 > 0.0) || !(m2 > 0.0) || !(d1sq > 0.0) || !(d2sq > 0.0)) {
    throw DomainError("masses and widths must be positive");
  }
  const double M = m1 + m2;
  ExactTransformReport r;
  r.delta_c_sq = d1sq * d2sq / (d1sq + d2sq);
  r.delta_r_sq = M * M * d1sq * d2sq / (m1 * m1 * d1sq + m2 * m2 * d2sq);
  r.alpha = (m1 * a + m2 * b) / M;
  r.beta = b - a;
  r.gamma_corr = (m2 * d2sq - m1 * d1sq) / (M * d1sq * d2sq);
  return r;
}

ResidualCorrelationReport residual_correlation(const CorrelatedGaussian& g) {
  ResidualCorrelationReport r;
  r.precision = g.precision.real();
  const auto n = r.precision.rows();
  const double scale = r.precision.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index k = 1; k < n; ++k) {
    r.cm_coupling = std::max(r.cm_coupling, std::abs(r.precision(0, k)));
    for (Eigen::Index j = 1; j < k; ++j) {
      r.relative_coupling = std::max(r.relative_coupling, std::abs(r.precision(j, k)));
    }
  }
  r.cm_decoupled = r.cm_coupling <= 1e-12 * scale;
  return r;
}

TransformResult transform_state(const SuperposedState& state,
                                const LinearCoordinateMap& map, TransformMode mode,
                                CoordinateSystem target) {
  if (state.coordinates() != CoordinateSystem::lab) {
    throw ContractError("transform_state expects a lab-coordinate state");
  }
  const std::size_t n = state.coordinate_count();
  if (map.size() != n) throw ContractError("map dimension does not match state");

  const Eigen::MatrixXd& A = map.position_matrix();
  const Eigen::MatrixXd inv = checked_inverse(A, "position matrix");
  const Eigen::MatrixXd conj = inv.transpose();
  const auto N = static_cast<Eigen::Index>(n);

  std::vector<Branch> branches;
  branches.reserve(state.branch_count());
  for (const auto& b : state.branches()) {
    Eigen::VectorXd centres(N), momenta(N);
    double phase = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto& p = b.packets[static_cast<std::size_t>(i)];
      centres(i) = p.centre();
      momenta(i) = p.momentum();
      phase += p.phase();
    }
    const Eigen::VectorXd new_centres = A * centres;
    const Eigen::VectorXd new_momenta = conj * momenta;
    Branch out{b.amplitude * std::polar(1.0, phase), {}};
    for (Eigen::Index a = 0; a < N; ++a) {
      complex diag = 0.0;
      for (Eigen::Index i = 0; i < N; ++i) {
        diag += inv(i, a) * inv(i, a) / b.packets[static_cast<std::size_t>(i)].width();
      }
      out.packets.emplace_back(new_centres(a), 1.0 / diag, new_momenta(a), 0.0);
    }
    branches.push_back(std::move(out));
  }

  TransformResult result{SuperposedState(state.masses(), std::move(branches), target),
                         mode, {}, {}, {}, false};
  if (mode == TransformMode::approximate) return result;

  if (n != 2 && n != 3) {
    throw UnsupportedCaseError("exact transform is implemented for two or three particles");
  }
  bool real_widths = true;
  for (const auto& b : state.branches()) {
    for (const auto& p : b.packets) real_widths = real_widths && p.width().imag() == 0.0;
  }

  const bool standard_map =
      n == 2 && (A - cm_relative_map(state.masses()).position_matrix()).cwiseAbs().maxCoeff() == 0.0;
  for (const auto& b : state.branches()) {
    auto g = CorrelatedGaussian::from_packets(b.packets);
    g.prefactor *= b.amplitude;
    g = g.transformed(A);
    if (n == 2 && !real_widths) {
      const double scale = g.precision.diagonal().cwiseAbs().maxCoeff();
      result.correlated = result.correlated || std::abs(g.precision(0, 1)) > 1e-12 * scale;
    } else if (n == 2) {
      ExactTransformReport r;
      if (standard_map) {
        r = exact_two_body_report(state.masses()[0], state.masses()[1],
                                  b.packets[0].width().real(), b.packets[1].width().real(),
                                  b.packets[0].centre(), b.packets[1].centre());
      } else {
        const Eigen::MatrixXd P = g.precision.real();
        r = {1.0 / P(0, 0), 1.0 / P(1, 1), g.centre(0), g.centre(1), -P(0, 1)};
      }
      result.correlated = result.correlated || r.gamma_corr != 0.0;
      result.exact_reports.push_back(r);
    } else {
      auto residual = residual_correlation(g);
      const double scale = residual.precision.diagonal().cwiseAbs().maxCoeff();
      result.correlated = result.correlated || !residual.cm_decoupled ||
                          residual.relative_coupling > 1e-12 * scale;
      result.residuals.push_back(std::move(residual));
    }
    result.exact_branches.push_back(std::move(g));
  }
  return result;
}

}  // namespace qref
