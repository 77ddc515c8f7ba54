#include "qref/reduce.hpp"

#include <algorithm>
#include <array>
#include <span>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qref/errors.hpp"

namespace qref {

namespace {

// Terms whose diagonal never exceeds this fraction of the largest term are
// ignored by coverage and resolution checks.
constexpr double kSignificant = 1e-12;

// Exponent of term(u + e0, u + e1) as -1/2 q u^2 + beta u + gamma.
complex bilinear(const Eigen::Vector2cd& a, const Eigen::Vector2cd& b) {
  return a(0) * b(0) + a(1) * b(1);
}

struct LineExponent {
  complex q;
  complex beta;
  complex gamma;
};

LineExponent along_line(const GaussianKernelTerm& t, const Eigen::Vector2cd& e) {
  const Eigen::Vector2cd ones(1.0, 1.0);
  const complex q = bilinear(ones, t.quad * ones);
  const complex beta = bilinear(ones, t.linear - t.quad * e);
  const complex gamma = -0.5 * bilinear(e, t.quad * e) + bilinear(t.linear, e);
  return {q, beta, gamma};
}

complex line_integral(const GaussianKernelTerm& t, const Eigen::Vector2cd& e) {
  const auto l = along_line(t, e);
  if (!(l.q.real() > 0.0)) throw DomainError("kernel term is not integrable");
  return t.scale * std::sqrt(2.0 * std::numbers::pi / l.q) *
         std::exp(l.beta * l.beta / (2.0 * l.q) + l.gamma);
}

// Envelope of |term(x, x)|: centre, standard deviation and log of the peak.
struct Envelope {
  double centre;
  double sigma;
  double log_peak;
};

LineExponent diagonal(const GaussianKernelTerm& t) {
  return along_line(t, Eigen::Vector2cd(0.0, t.ket_origin - t.bra_origin));
}

Envelope envelope(const GaussianKernelTerm& t) {
  const auto l = diagonal(t);
  const double rq = l.q.real();
  if (!(rq > 0.0)) throw DomainError("kernel term has no bounded diagonal");
  const double u0 = l.beta.real() / rq;
  const double log_scale = t.scale == 0.0 ? -std::numeric_limits<double>::infinity()
                                          : std::log(std::abs(t.scale));
  return {t.ket_origin + u0, 1.0 / std::sqrt(rq),
          log_scale + l.gamma.real() + 0.5 * l.beta.real() * u0};
}

std::vector<Envelope> significant_envelopes(const GaussianKernelOperator& rho) {
  std::vector<Envelope> all;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& t : rho.terms()) {
    all.push_back(envelope(t));
    top = std::max(top, all.back().log_peak);
  }
  std::vector<Envelope> kept;
  for (const auto& e : all) {
    if (e.log_peak >= top + std::log(kSignificant)) kept.push_back(e);
  }
  return kept;
}

}  // namespace

complex GaussianKernelTerm::operator()(double x, double xp) const {
  const Eigen::Vector2cd d(x - ket_origin, xp - bra_origin);
  return scale * std::exp(-0.5 * bilinear(d, quad * d) + bilinear(linear, d));
}

GaussianKernelOperator::GaussianKernelOperator(std::vector<GaussianKernelTerm> terms)
    : terms_(std::move(terms)), trace_(0.0) {
  for (const auto& t : terms_) {
    trace_ += line_integral(t, Eigen::Vector2cd(0.0, t.ket_origin - t.bra_origin));
  }
}

GaussianKernelOperator GaussianKernelOperator::from_mixture(
    const GaussianMixtureOperator& rho) {
  std::vector<GaussianKernelTerm> terms;
  terms.reserve(rho.terms().size());
  for (const auto& t : rho.terms()) {
    const auto& k = t.ket;
    const auto& b = t.bra;
    GaussianKernelTerm term;
    term.quad << 1.0 / k.width(), 0.0, 0.0, 1.0 / std::conj(b.width());
    term.linear << complex(0.0, k.momentum()), complex(0.0, -b.momentum());
    term.ket_origin = k.centre();
    term.bra_origin = b.centre();
    term.scale = t.coeff * k.norm_constant() * b.norm_constant() *
                 std::polar(1.0, k.momentum() * k.centre() + k.phase() -
                                     b.momentum() * b.centre() - b.phase());
    terms.push_back(term);
  }
  return GaussianKernelOperator(std::move(terms));
}

complex GaussianKernelOperator::operator()(double x, double xp) const {
  complex value = 0.0;
  for (const auto& t : terms_) value += t(x, xp);
  return value;
}

double GaussianKernelOperator::density(double x) const { return (*this)(x, x).real(); }

GaussianMixtureOperator::GaussianMixtureOperator(std::vector<MixtureTerm> terms)
    : terms_(std::move(terms)), trace_(0.0) {
  for (const auto& t : terms_) trace_ += t.coeff * packet_overlap(t.bra, t.ket);
}

complex GaussianMixtureOperator::operator()(double x, double xp) const {
  complex value = 0.0;
  for (const auto& t : terms_) value += t.coeff * t.ket(x) * std::conj(t.bra(xp));
  return value;
}

double GaussianMixtureOperator::density(double x) const { return (*this)(x, x).real(); }

complex GaussianMixtureOperator::matrix_element(const GaussianPacket& u,
                                                const GaussianPacket& v) const {
  complex value = 0.0;
  for (const auto& t : terms_) {
    value += t.coeff * packet_overlap(u, t.ket) * packet_overlap(t.bra, v);
  }
  return value;
}

complex GaussianMixtureOperator::shift_expectation(double displacement) const {
  complex value = 0.0;
  for (const auto& t : terms_) {
    value += t.coeff * packet_overlap(t.bra, shifted(t.ket, displacement, 0.0));
  }
  return value;
}

GaussianMixtureOperator partial_trace(const SuperposedState& state,
                                      const std::vector<std::size_t>& keep) {
  const std::size_t n = state.coordinate_count();
  if (keep.empty() || keep.size() >= n) {
    throw ContractError("partial trace must keep some but not all coordinates");
  }
  if (keep.size() > 1) {
    throw UnsupportedCaseError("only a single retained coordinate is supported");
  }
  const std::size_t kept = keep.front();
  if (kept >= n) throw ContractError("retained coordinate index out of range");

  const auto normalized = gram_and_normalize(state).state;
  const auto& branches = normalized.branches();
  std::vector<MixtureTerm> terms;
  terms.reserve(branches.size() * branches.size());
  for (const auto& bi : branches) {
    for (const auto& bj : branches) {
      complex c = bi.amplitude * std::conj(bj.amplitude);
      for (std::size_t p = 0; p < n; ++p) {
        if (p != kept) c *= packet_overlap(bj.packets[p], bi.packets[p]);
      }
      terms.push_back({c, bi.packets[kept], bj.packets[kept]});
    }
  }
  return GaussianMixtureOperator(std::move(terms));
}

double purity(const GaussianMixtureOperator& rho) {
  const auto& terms = rho.terms();
  complex sum = 0.0;
  for (const auto& t : terms) {
    for (const auto& u : terms) {
      sum += t.coeff * u.coeff * packet_overlap(t.bra, u.ket) *
             packet_overlap(u.bra, t.ket);
    }
  }
  return sum.real() / std::norm(rho.trace());
}

complex expectation_weyl(const SuperposedState& state, const LinearPhaseSpaceForm& form,
                         double displacement) {
  const std::size_t n = state.coordinate_count();
  if (form.x_coeffs.size() != n || form.p_coeffs.size() != n) {
    throw ContractError("form dimension does not match state");
  }
  if (!form.is_position_only() && !form.is_momentum_only()) {
    throw UnsupportedCaseError("Weyl expectation needs a position-only or momentum-only form");
  }
  WeylShift shift{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    // exp(-i s c p) translates by s c; exp(-i s c x) boosts by -s c.
    shift.position_shifts[i] = displacement * form.p_coeffs[i];
    shift.momentum_boosts[i] = -displacement * form.x_coeffs[i];
  }
  const auto normalized = gram_and_normalize(state).state;
  const auto moved = apply_weyl(normalized, shift);
  complex value = 0.0;
  for (const auto& bi : normalized.branches()) {
    for (const auto& bj : moved.branches()) {
      complex g = std::conj(bi.amplitude) * bj.amplitude;
      for (std::size_t p = 0; p < n; ++p) g *= packet_overlap(bi.packets[p], bj.packets[p]);
      value += g;
    }
  }
  return value;
}

complex coherence(const GaussianMixtureOperator& rho, double ket_centre,
                  double bra_centre) {
  const double separation = bra_centre - ket_centre;
  const double radius = separation == 0.0 ? std::numeric_limits<double>::infinity()
                                           : 0.5 * std::abs(separation);
  complex value = 0.0;
  for (const auto& t : rho.terms()) {
    if (std::abs(t.ket.centre() - ket_centre) < radius &&
        std::abs(t.bra.centre() - bra_centre) < radius) {
      value += t.coeff * packet_overlap(t.bra, shifted(t.ket, separation, 0.0));
    }
  }
  return value;
}

GaussianKernelOperator partial_trace(const std::vector<CorrelatedGaussian>& branches,
                                     std::size_t keep) {
  if (branches.empty()) throw ContractError("no branches to trace");
  const auto n = static_cast<Eigen::Index>(branches.front().size());
  const auto k = static_cast<Eigen::Index>(keep);
  if (n < 2) throw ContractError("partial trace must keep some but not all coordinates");
  if (k >= n) throw ContractError("retained coordinate index out of range");
  for (const auto& g : branches) {
    if (static_cast<Eigen::Index>(g.size()) != n) throw ContractError("branch dimension mismatch");
  }

  complex norm = 0.0;
  for (const auto& gi : branches) {
    for (const auto& gj : branches) norm += overlap(gi, gj);
  }
  if (!(norm.real() > 0.0)) throw DegenerateStateError("state has zero norm");

  // Variables: x (ket), x' (bra), then the traced coordinates.
  std::vector<Eigen::Index> ket_slots(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> bra_slots(static_cast<std::size_t>(n));
  Eigen::Index next = 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (i == k) {
      ket_slots[s] = 0;
      bra_slots[s] = 1;
    } else {
      ket_slots[s] = bra_slots[s] = next++;
    }
  }

  std::vector<GaussianKernelTerm> terms;
  terms.reserve(branches.size() * branches.size());
  for (const auto& gi : branches) {
    for (const auto& gj : branches) {
      Eigen::VectorXd ket_origin = 0.5 * (gi.centre + gj.centre);
      Eigen::VectorXd bra_origin = ket_origin;
      ket_origin(k) = gi.centre(k);
      bra_origin(k) = gj.centre(k);
      GaussianExponent e(n + 1);
      e.add(gi.recentred(ket_origin), ket_slots, false);
      e.add(gj.recentred(bra_origin), bra_slots, true);
      const auto m = e.marginal(2);
      GaussianKernelTerm t;
      t.quad = m.quad();
      t.linear = m.linear();
      t.ket_origin = gi.centre(k);
      t.bra_origin = gj.centre(k);
      complex log_weight = std::log(m.scale()) + m.constant() - std::log(norm.real());
      // Move the origin to the peak of |term| so the scale is its true size.
      const Eigen::LLT<Eigen::Matrix2d> llt(t.quad.real());
      if (llt.info() == Eigen::Success) {
        const Eigen::Vector2d d = llt.solve(t.linear.real());
        const Eigen::Vector2cd dc = d.cast<complex>();
        log_weight += -0.5 * bilinear(dc, t.quad * dc) + bilinear(t.linear, dc);
        t.linear -= t.quad * dc;
        t.ket_origin += d(0);
        t.bra_origin += d(1);
      }
      t.scale = std::exp(log_weight);
      terms.push_back(t);
    }
  }
  return GaussianKernelOperator(std::move(terms));
}

double purity(const GaussianKernelOperator& rho) {
  const auto& terms = rho.terms();
  const std::array<Eigen::Index, 2> forward{0, 1};
  const std::array<Eigen::Index, 2> swapped{1, 0};
  const auto add = [](GaussianExponent& e, const GaussianKernelTerm& t,
                      const Eigen::Vector2cd& offset, std::span<const Eigen::Index> slots) {
    const Eigen::VectorXcd lin = t.linear - t.quad * offset;
    e.add_quadratic(t.quad, lin, -0.5 * bilinear(offset, t.quad * offset) + bilinear(t.linear, offset),
                    slots);
  };
  complex sum = 0.0;
  for (const auto& t : terms) {
    for (const auto& u : terms) {
      // Integration variables measured from (ket_origin_t, bra_origin_t).
      const double x0 = t.ket_origin, y0 = t.bra_origin;
      GaussianExponent e(2);
      add(e, t, Eigen::Vector2cd(0.0, 0.0), forward);
      add(e, u, Eigen::Vector2cd(y0 - u.ket_origin, x0 - u.bra_origin), swapped);
      sum += t.scale * u.scale * e.integrate();
    }
  }
  return sum.real() / std::norm(rho.trace());
}

complex coherence(const GaussianKernelOperator& rho, double ket_centre,
                  double bra_centre) {
  const double separation = bra_centre - ket_centre;
  const double radius = separation == 0.0 ? std::numeric_limits<double>::infinity()
                                           : 0.5 * std::abs(separation);
  complex value = 0.0;
  for (const auto& t : rho.terms()) {
    if (std::abs(t.ket_origin - ket_centre) < radius &&
        std::abs(t.bra_origin - bra_centre) < radius) {
      value += line_integral(
          t, Eigen::Vector2cd(t.bra_origin - separation - t.ket_origin, 0.0));
    }
  }
  return value;
}

double GridSpec::spacing() const {
  return points > 1 ? 2.0 * half_extent / static_cast<double>(points - 1) : 0.0;
}

double GridSpec::position(std::size_t i) const {
  return centre - half_extent + spacing() * static_cast<double>(i);
}

GridSpec default_grid(const GaussianKernelOperator& rho, std::size_t points,
                      double sigmas) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& e : significant_envelopes(rho)) {
    lo = std::min(lo, e.centre - sigmas * e.sigma);
    hi = std::max(hi, e.centre + sigmas * e.sigma);
  }
  if (!std::isfinite(lo)) throw ContractError("operator has no significant terms");
  return GridSpec{0.5 * (lo + hi), 0.5 * (hi - lo), points};
}

GridSpec default_grid(const GaussianMixtureOperator& rho, std::size_t points,
                      double sigmas) {
  return default_grid(GaussianKernelOperator::from_mixture(rho), points, sigmas);
}

double shortest_fringe_period(const GaussianKernelOperator& rho) {
  const auto envelopes = significant_envelopes(rho);
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& e : envelopes) top = std::max(top, e.log_peak);
  double kmax = 0.0;
  for (const auto& t : rho.terms()) {
    const auto env = envelope(t);
    if (env.log_peak < top + std::log(kSignificant)) continue;
    const auto l = diagonal(t);
    for (double x : {env.centre - 3.0 * env.sigma, env.centre, env.centre + 3.0 * env.sigma}) {
      const double u = x - t.ket_origin;
      kmax = std::max(kmax, std::abs((-l.q * u + l.beta).imag()));
    }
  }
  return kmax > 0.0 ? 2.0 * std::numbers::pi / kmax
                    : std::numeric_limits<double>::infinity();
}

double shortest_fringe_period(const GaussianMixtureOperator& rho) {
  return shortest_fringe_period(GaussianKernelOperator::from_mixture(rho));
}

FringeProfile fringe_profile(const GaussianKernelOperator& rho, const GridSpec& grid) {
  if (grid.points < 3 || !(grid.half_extent > 0.0)) {
    throw ResolutionError("grid needs at least three points and a positive extent");
  }
  const double lo = grid.centre - grid.half_extent;
  const double hi = grid.centre + grid.half_extent;
  for (const auto& e : significant_envelopes(rho)) {
    if (e.centre - 6.0 * e.sigma < lo || e.centre + 6.0 * e.sigma > hi) {
      throw ResolutionError("grid does not cover 6 sigma of every significant term");
    }
  }
  const double period = shortest_fringe_period(rho);
  if (period / grid.spacing() < 8.0) {
    throw ResolutionError("grid has fewer than 8 points per fringe period (period " +
                          std::to_string(period) + ", spacing " +
                          std::to_string(grid.spacing()) + ")");
  }
  FringeProfile profile{{}, grid};
  profile.samples.reserve(grid.points);
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double x = grid.position(i);
    double value = rho.density(x);
    if (value < 0.0) {
      if (value < -1e-12) throw DomainError("negative density: operator is not positive");
      value = 0.0;
    }
    profile.samples.push_back({x, value});
  }
  return profile;
}

FringeProfile fringe_profile(const GaussianMixtureOperator& rho, const GridSpec& grid) {
  return fringe_profile(GaussianKernelOperator::from_mixture(rho), grid);
}

namespace {

// Vertex value of the parabola through three equally spaced samples.
double parabolic_extremum(double y0, double y1, double y2) {
  const double curvature = y2 - 2.0 * y1 + y0;
  if (curvature == 0.0) return y1;
  return y1 - (y2 - y0) * (y2 - y0) / (8.0 * curvature);
}

}  // namespace

double visibility(const FringeProfile& profile) {
  const auto& s = profile.samples;
  if (s.size() < 3) throw ContractError("visibility needs at least three samples");
  std::vector<double> cumulative(s.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + 0.5 * (s[i].intensity + s[i - 1].intensity) *
                                            (s[i].position - s[i - 1].position);
  }
  const double total = cumulative.back();
  if (!(total > 0.0)) throw ContractError("visibility of an empty profile");

  const auto quartile = [&](double q) {
    return static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), q * total) -
        cumulative.begin());
  };
  const std::size_t first = std::max<std::size_t>(1, quartile(0.25));
  const std::size_t last = std::min(s.size() - 2, quartile(0.75));

  const auto is_min = [&](std::size_t i) {
    return s[i].intensity < s[i - 1].intensity && s[i].intensity <= s[i + 1].intensity;
  };
  const auto is_max = [&](std::size_t i) {
    return s[i].intensity > s[i - 1].intensity && s[i].intensity >= s[i + 1].intensity;
  };
  const auto refined = [&](std::size_t i) {
    return parabolic_extremum(s[i - 1].intensity, s[i].intensity, s[i + 1].intensity);
  };

  double sum = 0.0;
  int count = 0;
  for (std::size_t i = first; i <= last; ++i) {
    if (!is_min(i)) continue;
    std::size_t left = i - 1;
    while (left >= 1 && !is_max(left)) --left;
    std::size_t right = i + 1;
    while (right + 1 < s.size() && !is_max(right)) ++right;
    if (left < 1 || right + 1 >= s.size()) continue;
    const double lo = std::max(0.0, refined(i));
    const double hi = 0.5 * (refined(left) + refined(right));
    if (hi + lo > 0.0) {
      sum += std::clamp((hi - lo) / (hi + lo), 0.0, 1.0);
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

DetectorProbabilities detector_probabilities(const GaussianKernelOperator& rho,
                                             double left_centre, double right_centre,
                                             double phase_convention,
                                             DetectorPlacement placement) {
  const double separation = right_centre - left_centre;
  if (!(separation > 0.0)) throw ContractError("right branch must lie right of left branch");
  for (const auto& e : significant_envelopes(rho)) {
    if (6.0 * e.sigma >= separation) {
      throw ContractError("detector branches are not resolvable: packets too wide");
    }
  }
  const double tr = rho.trace().real();
  double p_left = 0.0;
  if (placement == DetectorPlacement::output_ports) {
    const complex c = coherence(rho, left_centre, right_centre) / tr;
    p_left = 0.5 + (std::polar(1.0, phase_convention) * c).real();
  } else {
    complex population = 0.0;
    const double mid = 0.5 * (left_centre + right_centre);
    for (const auto& t : rho.terms()) {
      if (t.ket_origin < mid && t.bra_origin < mid) {
        population += line_integral(t, Eigen::Vector2cd(0.0, t.ket_origin - t.bra_origin));
      }
    }
    p_left = population.real() / tr;
  }
  p_left = std::clamp(p_left, 0.0, 1.0);
  return {p_left, 1.0 - p_left};
}

DetectorProbabilities detector_probabilities(const GaussianMixtureOperator& rho,
                                             double left_centre, double right_centre,
                                             double phase_convention,
                                             DetectorPlacement placement) {
  return detector_probabilities(GaussianKernelOperator::from_mixture(rho), left_centre,
                                right_centre, phase_convention, placement);
}

}  // namespace qref
