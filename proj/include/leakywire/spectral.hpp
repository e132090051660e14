#ifndef LEAKYWIRE_SPECTRAL_HPP
#define LEAKYWIRE_SPECTRAL_HPP

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "birman_schwinger.hpp"
#include "constants.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "kernels.hpp"

namespace leakywire {

inline void check_coupling(double alpha) {
    if (!std::isfinite(alpha))
        throw config_error("alpha must be finite");
}

/// Bottom of the essential spectrum, -4 exp(2(-2 pi alpha + psi(1))).
inline double threshold(double alpha) {
    check_coupling(alpha);
    return -4.0 * std::exp(2.0 * (-2.0 * pi * alpha + psi_one));
}

/// sqrt(-threshold), the kappa at which t_kappa(0) = alpha.
inline double kappa_alpha(double alpha) {
    check_coupling(alpha);
    return 2.0 * std::exp(psi_one - 2.0 * pi * alpha);
}

/// Guided band of the straight wire.
inline double dispersion(double alpha, double p) { return threshold(alpha) + p * p; }

struct SearchOptions {
    /// Upper end of the kappa bracket; defaults to 4 kappa_alpha.
    std::optional<double> kappa_max;
    double root_tol = 1e-10;
    /// The bracket starts at kappa_alpha (1 + margin).
    double margin = 1e-3;
    int branches = 4;
    /// Defaults to default_diagonal_cutoff(h).
    std::optional<double> diagonal_cutoff;
    int max_iterations = 100;
};

struct BoundState {
    double kappa_star = 0.0;
    double energy = 0.0;
    /// Charge density on the grid, sum_i h phi_i^2 = 1.
    Eigen::VectorXd phi;
    int branch_index = 0;
    /// |mu_k(kappa_star) - alpha|
    double residual = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    int iterations = 0;
};

struct BoundStateSearch {
    double alpha = 0.0;
    double xi_alpha = 0.0;
    double kappa_alpha = 0.0;
    double kappa_lo = 0.0;
    double kappa_hi = 0.0;
    /// Sorted by energy, deepest first.
    std::vector<BoundState> states;
    std::vector<std::string> notices;
};

namespace detail {

struct BranchSample {
    double mu = 0.0;
    double slope = 0.0;
    Eigen::VectorXd vector;
};

inline BranchSample sample_branch(const Discretization& disc, double kappa, double cutoff, int branch,
                                  bool with_slope) {
    const KernelParams params{kappa, cutoff};
    const BSMatrix q = assemble_Q(disc, params);
    const auto eig = top_symmetric_eigen(q.entries, branch + 1);
    BranchSample out;
    out.mu = eig.values(branch);
    out.vector = eig.vectors.col(branch);
    if (with_slope) {
        // Hellmann-Feynman: d mu / d kappa = v' Q' v
        const Matrix dq = assemble_Q_dkappa(disc, params);
        out.slope = out.vector.dot(dq * out.vector);
    }
    return out;
}

} // namespace detail

/// Bound states of H_{alpha,Gamma} below the threshold.
///
/// Each eigenvalue branch mu_k(kappa) of Q^kappa that crosses alpha inside
/// [kappa_alpha (1 + margin), kappa_max] is solved for mu_k = alpha with a
/// Newton iteration safeguarded by bisection on the bracket.
inline BoundStateSearch find_bound_states(const Discretization& disc, double alpha, const SearchOptions& opt = {}) {
    check_coupling(alpha);
    if (opt.branches < 1 || static_cast<std::size_t>(opt.branches) > disc.N)
        throw config_error("branches must be in [1, N]");
    if (!(opt.root_tol > 0) || !(opt.margin > 0))
        throw config_error("root_tol and margin must be positive");
    BoundStateSearch out;
    out.alpha = alpha;
    out.xi_alpha = threshold(alpha);
    out.kappa_alpha = kappa_alpha(alpha);
    out.kappa_lo = out.kappa_alpha * (1 + opt.margin);
    out.kappa_hi = opt.kappa_max.value_or(4 * out.kappa_alpha);
    if (!(out.kappa_hi > out.kappa_lo))
        throw config_error("kappa_max must exceed kappa_alpha (1 + margin)");
    const double cutoff = opt.diagonal_cutoff.value_or(default_diagonal_cutoff(disc.h));

    const int k = opt.branches;
    const auto at_lo = top_symmetric_eigen(assemble_Q(disc, {out.kappa_lo, cutoff}).entries, k);
    const auto at_hi = top_symmetric_eigen(assemble_Q(disc, {out.kappa_hi, cutoff}).entries, k);

    for (int b = 0; b < k; ++b) {
        const double f_lo = at_lo.values(b) - alpha;
        const double f_hi = at_hi.values(b) - alpha;
        if (!(f_lo > 0 && f_hi < 0)) {
            if (f_hi >= 0)
                out.notices.push_back("branch " + std::to_string(b) + " still above alpha at kappa_max");
            continue;
        }
        double a = out.kappa_lo, c = out.kappa_hi;
        double fa = f_lo, fc = f_hi;
        double x = a - fa * (c - a) / (fc - fa);
        double dx_old = c - a;
        detail::BranchSample sample;
        int it = 0;
        bool converged = false;
        for (; it < opt.max_iterations; ++it) {
            sample = detail::sample_branch(disc, x, cutoff, b, true);
            const double f = sample.mu - alpha;
            if (f > 0) {
                a = x;
                fa = f;
            } else {
                c = x;
                fc = f;
            }
            double next = sample.slope < 0 ? x - f / sample.slope : 0.5 * (a + c);
            if (!(next > a && next < c) || std::abs(2 * (next - x)) > std::abs(dx_old))
                next = 0.5 * (a + c);
            const double dx = next - x;
            dx_old = dx;
            if (std::abs(f) < opt.root_tol && (std::abs(dx) < opt.root_tol || c - a < opt.root_tol)) {
                converged = true;
                break;
            }
            x = next;
        }
        if (!converged)
            throw numeric_error("root iteration on branch " + std::to_string(b) + " did not converge");
        BoundState st;
        st.kappa_star = x;
        st.energy = -x * x;
        Eigen::VectorXd v = sample.vector;
        fix_sign(v);
        st.phi = v / std::sqrt(disc.h);
        st.branch_index = b;
        st.residual = std::abs(sample.mu - alpha);
        st.bracket_lo = a;
        st.bracket_hi = c;
        st.iterations = it + 1;
        out.states.push_back(std::move(st));
    }
    std::sort(out.states.begin(), out.states.end(),
              [](const BoundState& l, const BoundState& r) { return l.energy < r.energy; });
    for (std::size_t i = 0; i + 1 < out.states.size(); ++i) {
        if (std::abs(out.states[i].kappa_star - out.states[i + 1].kappa_star) < opt.root_tol)
            out.notices.push_back("degenerate crossing: branches " + std::to_string(out.states[i].branch_index) +
                                  " and " + std::to_string(out.states[i + 1].branch_index) + " at kappa " +
                                  std::to_string(out.states[i].kappa_star));
    }
    return out;
}

/// Fitted exponential decay rate of |phi| along the right tail, on
/// [s_+ + 1, L/2] (the straight line uses [1, L/2]).
inline double phi_decay_rate(const Discretization& disc, const BoundState& st) {
    const double start = (disc.straight ? 0.0 : disc.s_plus) + 1.0;
    const double stop = disc.L / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < disc.N; ++i) {
        const double s = disc.s[i];
        const double v = std::abs(st.phi(static_cast<Eigen::Index>(i)));
        if (s < start || s > stop || !(v > 0))
            continue;
        const double y = std::log(v);
        sx += s;
        sy += y;
        sxx += s * s;
        sxy += s * y;
        ++n;
    }
    if (n < 3)
        throw config_error("tail too short for a decay fit");
    return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Single-layer potential f(x) = c sum_i h G(x - Gamma(s_i)) phi_i of a bound
/// state, with c fixing the L^2(R^3) norm to one. The norm uses the closed
/// form of the Green-function convolution, so no volume quadrature is needed.
class Eigenfunction {
public:
    Eigenfunction(const Discretization& disc, const BoundState& st, std::optional<double> min_distance = std::nullopt)
        : points_(disc.points), weights_(disc.h * st.phi), kappa_(st.kappa_star),
          min_distance_(min_distance.value_or(default_diagonal_cutoff(disc.h))) {
        const auto n = points_.cols();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            double row = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                row += weights_(i) * std::exp(-kappa_ * (points_.col(i) - points_.col(j)).norm());
            sum += row * weights_(j);
        }
        norm_sq_raw_ = sum / (8 * pi * kappa_);
        scale_ = 1 / std::sqrt(norm_sq_raw_);
    }

    /// Unnormalized single layer.
    double raw(const Vec3& x) const {
        double v = 0.0;
        for (Eigen::Index i = 0; i < points_.cols(); ++i) {
            const double d = (x - points_.col(i)).norm();
            if (d < min_distance_)
                throw contract_error("eigenfunction evaluated within diagonal_cutoff of the curve; use "
                                     "verify_boundary_condition for near-curve values");
            v += weights_(i) * std::exp(-kappa_ * d) / (4 * pi * d);
        }
        return v;
    }

    double operator()(const Vec3& x) const { return scale_ * raw(x); }

    double scale() const { return scale_; }
    double raw_norm_squared() const { return norm_sq_raw_; }
    double kappa() const { return kappa_; }

private:
    Eigen::Matrix3Xd points_;
    Eigen::VectorXd weights_;
    double kappa_;
    double min_distance_;
    double norm_sq_raw_ = 0.0;
    double scale_ = 1.0;
};

struct BoundaryCheckOptions {
    /// Half-width A of the near window; 0 picks max(1, 16 h).
    double window = 0.0;
    /// Closest admissible evaluation distance; r must exceed 10 times this.
    double near_cutoff = 1e-8;
    /// Relative RMS misfit of f = -Xi ln r + Omega above which the
    /// extrapolation is rejected.
    double fit_tolerance = 1e-3;
};

struct DirectionFit {
    double xi = 0.0;
    double omega = 0.0;
    double fit_rms = 0.0;
    double relative_residual = 0.0;
};

struct BoundarySample {
    double s = 0.0;
    DirectionFit binormal;
    DirectionFit normal;
    double relative_residual = 0.0;
    double direction_spread = 0.0;
};

struct BoundaryCheck {
    std::vector<BoundarySample> samples;
    double max_relative_residual = 0.0;
    double max_direction_spread = 0.0;
};

namespace detail {

inline double smooth_step(double x) {
    if (x <= 0)
        return 0.0;
    if (x >= 1)
        return 1.0;
    const double a = std::exp(-1 / x);
    const double b = std::exp(-1 / (1 - x));
    return a / (a + b);
}

/// 1 on |u| <= A/2, 0 on |u| >= A, C-infinity in between.
inline double window(double u, double A) { return 1.0 - smooth_step((std::abs(u) - A / 2) / (A / 2)); }

/// Eight-point Lagrange interpolation on the periodic grid.
inline double interpolate_periodic(const Discretization& disc, const Eigen::VectorXd& v, double s) {
    const double u = (s + disc.L) / disc.h;
    const auto j0 = static_cast<long>(std::floor(u)) - 3;
    const auto n = static_cast<long>(disc.N);
    double out = 0.0;
    for (int a = 0; a < 8; ++a) {
        double w = 1.0;
        for (int b = 0; b < 8; ++b)
            if (b != a)
                w *= (u - static_cast<double>(j0 + b)) / static_cast<double>(a - b);
        out += w * v(((j0 + a) % n + n) % n);
    }
    return out;
}

} // namespace detail

/// Single layer of the bound state near Gamma(s0): trapezoid sum for the part
/// outside a smooth window around s0, adaptive quadrature (in u = r sinh t)
/// of the windowed part against the interpolated density.
inline double near_field(const ArcLengthCurve& curve, const Discretization& disc, const BoundState& st, double s0,
                         const Vec3& x, double window_half_width, double distance_hint) {
    const double A = window_half_width;
    const double kappa = st.kappa_star;
    double far = 0.0;
    for (std::size_t i = 0; i < disc.N; ++i) {
        const double chi = detail::window(disc.s[i] - s0, A);
        if (chi >= 1.0)
            continue;
        const double d = (x - disc.points.col(static_cast<Eigen::Index>(i))).norm();
        far += disc.h * (1 - chi) * std::exp(-kappa * d) / (4 * pi * d) * st.phi(static_cast<Eigen::Index>(i));
    }
    const double r = distance_hint;
    auto integrand = [&](double t) {
        const double u = r * std::sinh(t);
        const double d = (x - curve.point(s0 + u)).norm();
        return detail::window(u, A) * std::exp(-kappa * d) / (4 * pi * d) *
               detail::interpolate_periodic(disc, st.phi, s0 + u) * r * std::cosh(t);
    };
    const double tmax = std::asinh(A / r);
    using rule = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double near = rule::integrate(integrand, -tmax, 0.0, 15, 1e-11) +
                      rule::integrate(integrand, 0.0, tmax, 15, 1e-11);
    return far + near;
}

/// Least-squares fit f(r) = -Xi ln r + Omega, plus the curvature corrections
/// r ln r and r when at least six radii are given.
inline DirectionFit fit_log_profile(const std::vector<double>& r, const std::vector<double>& f, double alpha) {
    const auto n = static_cast<Eigen::Index>(r.size());
    const Eigen::Index cols = n >= 6 ? 4 : 2;
    Matrix a(n, cols);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lr = std::log(r[static_cast<std::size_t>(i)]);
        a(i, 0) = -lr;
        a(i, 1) = 1.0;
        if (cols == 4) {
            a(i, 2) = r[static_cast<std::size_t>(i)] * lr;
            a(i, 3) = r[static_cast<std::size_t>(i)];
        }
        y(i) = f[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
    DirectionFit out;
    out.xi = c(0);
    out.omega = c(1);
    out.fit_rms = std::sqrt((a * c - y).squaredNorm() / static_cast<double>(n)) /
                  (std::abs(out.xi) + std::abs(out.omega));
    const double lhs = 2 * pi * alpha * out.xi;
    const double denom = std::abs(out.omega) + std::abs(lhs);
    out.relative_residual = denom > 0 ? std::abs(lhs - out.omega) / denom : 0.0;
    return out;
}

/// Geometric radii from r_max down to r_min.
inline std::vector<double> default_r_sequence(double r_max = 1e-3, double r_min = 1e-6, int count = 10) {
    std::vector<double> r(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        r[static_cast<std::size_t>(i)] = r_max * std::pow(r_min / r_max, double(i) / (count - 1));
    return r;
}

/// Checks 2 pi alpha Xi(f) = Omega(f) for the eigenfunction f of a bound state
/// by fitting f = -Xi ln r + Omega along the rotated binormal and normal.
inline BoundaryCheck verify_boundary_condition(const ArcLengthCurve& curve, const Discretization& disc,
                                               const BoundState& st, double alpha,
                                               const std::vector<double>& s_samples,
                                               const std::vector<double>& r_sequence,
                                               const BoundaryCheckOptions& opt = {}) {
    check_coupling(alpha);
    if (r_sequence.size() < 3)
        throw config_error("r_sequence needs at least three radii");
    for (std::size_t i = 0; i < r_sequence.size(); ++i) {
        if (!(r_sequence[i] > 10 * opt.near_cutoff))
            throw config_error("r_sequence entries must exceed 10 * near_cutoff");
        if (i > 0 && !(r_sequence[i] < r_sequence[i - 1]))
            throw config_error("r_sequence must be decreasing");
    }
    const double r0 = tubular_radius(curve);
    if (!(r_sequence.front() < r0))
        throw config_error("r_sequence exceeds the tubular radius estimate");
    const double A = opt.window > 0 ? opt.window : std::max(1.0, 16 * disc.h);
    BoundaryCheck out;
    for (double s0 : s_samples) {
        if (!(std::abs(s0) + A + 8 * disc.h < disc.L))
            throw config_error("boundary sample " + std::to_string(s0) + " too close to the grid ends");
        BoundarySample bs;
        bs.s = s0;
        for (int dir = 0; dir < 2; ++dir) {
            std::vector<double> values;
            for (double r : r_sequence) {
                const double xi = dir == 0 ? r : 0.0;
                const double eta = dir == 0 ? 0.0 : r;
                const Vec3 x = shifted_curve_point(curve, s0, xi, eta, r0).point;
                values.push_back(near_field(curve, disc, st, s0, x, A, r));
            }
            const DirectionFit fit = fit_log_profile(r_sequence, values, alpha);
            if (!(fit.fit_rms < opt.fit_tolerance))
                throw accuracy_error("log-profile fit at s = " + std::to_string(s0) + " misfit " +
                                         std::to_string(fit.fit_rms),
                                     fit.omega, fit.fit_rms);
            (dir == 0 ? bs.binormal : bs.normal) = fit;
        }
        bs.relative_residual = std::max(bs.binormal.relative_residual, bs.normal.relative_residual);
        bs.direction_spread = std::abs(bs.binormal.xi - bs.normal.xi) /
                              std::max(std::abs(bs.binormal.xi), std::abs(bs.normal.xi));
        out.max_relative_residual = std::max(out.max_relative_residual, bs.relative_residual);
        out.max_direction_spread = std::max(out.max_direction_spread, bs.direction_spread);
        out.samples.push_back(bs);
    }
    return out;
}

} // namespace leakywire

#endif
