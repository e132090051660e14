#ifndef LEAKYWIRE_KERNELS_HPP
#define LEAKYWIRE_KERNELS_HPP

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <vector>

#include "constants.hpp"
#include "error.hpp"
#include "geometry.hpp"

namespace leakywire {

struct KernelParams {
    double kappa = 1.0;
    /// Below this arc-length separation B uses its curvature Taylor form.
    double diagonal_cutoff = 1e-3;

    void validate(std::optional<double> spacing = std::nullopt) const {
        if (!(kappa > 0) || !std::isfinite(kappa))
            throw config_error("kappa must be positive and finite");
        if (!(diagonal_cutoff > 0))
            throw config_error("diagonal_cutoff must be positive");
        if (spacing && diagonal_cutoff > *spacing)
            throw config_error("diagonal_cutoff exceeds the grid spacing");
    }
};

/// Default cutoff for grid spacing h: half a cell, capped at 1e-3 so the
/// Taylor seam stays below 1e-6 relative.
inline double default_diagonal_cutoff(double h) { return std::min(h / 2, 1e-3); }

inline double green3d(double kappa, double distance) {
    if (!(distance > 0))
        throw contract_error("green3d: singular at x = 0");
    return std::exp(-kappa * distance) / (4 * pi * distance);
}

inline double green3d(const KernelParams& p, const Vec3& x) { return green3d(p.kappa, x.norm()); }

enum class ConvolutionMode { closed_form, quadrature };

/// Integral over R^3 of G(y-x) G(x-z).
///
/// The quadrature mode works in spherical coordinates about the midpoint of
/// [y, z] with the polar axis along z - y; the azimuth is exact by symmetry.
/// Radial panels split at |y-z|/2, where the two point singularities sit, and
/// stop where exp(-kappa R) < 1e-12.
inline double green_convolution(const KernelParams& p, const Vec3& y, const Vec3& z,
                                ConvolutionMode mode = ConvolutionMode::closed_form, double tolerance = 1e-10) {
    p.validate();
    const double kappa = p.kappa;
    const double d = (y - z).norm();
    if (mode == ConvolutionMode::closed_form)
        return std::exp(-kappa * d) / (8 * pi * kappa);

    const double half = d / 2;
    using rule = boost::math::quadrature::gauss_kronrod<double, 31>;
    double worst_inner = 0.0;
    auto shell = [&](double r) {
        if (r <= 0)
            return 0.0;
        if (half == 0.0)
            return std::exp(-2 * kappa * r) / (4 * pi);
        // Polar integral in the distance a = |x - y| instead of cos(theta):
        // a da = r half dcos(theta) removes the 1/a singularity. The hemisphere
        // nearer y (a <= b) gives half the shell by mirror symmetry.
        const double a_lo = std::abs(r - half);
        const double a_mid = std::sqrt(r * r + half * half);
        auto f = [&](double a) {
            const double b = std::sqrt(std::max(2 * (r * r + half * half) - a * a, 0.0));
            return r / (4 * pi * half) * std::exp(-kappa * (a + b)) / b;
        };
        double err = 0.0;
        const double v = rule::integrate(f, a_lo, a_mid, 20, tolerance, &err);
        worst_inner = std::max(worst_inner, err / std::max(std::abs(v), 1e-300));
        return v;
    };
    const double R = half + 28.0 / kappa;
    double err_a = 0.0, err_b = 0.0;
    const double a = half > 0 ? rule::integrate(shell, 0.0, half, 20, tolerance, &err_a) : 0.0;
    const double b = rule::integrate(shell, half, R, 20, tolerance, &err_b);
    const double value = a + b;
    const double rel = (err_a + err_b) / std::abs(value);
    if (!(rel < 1e-7) || worst_inner > 1e-6)
        throw accuracy_error("green_convolution quadrature did not converge", value, rel * std::abs(value));
    return value;
}

/// B kernel from precomputed points: G(chord) - G(arc) with the cancellation
/// done in closed form. Below the cutoff the curvature Taylor term
/// gamma^2 u (1 + kappa u) exp(-kappa u) / (96 pi) is used, with gamma^2 the
/// average of the two end values.
inline double b_kernel_points(const Vec3& a, const Vec3& b, double u, double gamma_sq_avg, double kappa,
                              double cutoff) {
    u = std::abs(u);
    if (u == 0.0)
        return 0.0;
    if (u <= cutoff)
        return gamma_sq_avg * u * (1 + kappa * u) * std::exp(-kappa * u) / (96 * pi);
    const double chord = (a - b).norm();
    const double gap = u - chord;  // >= 0 up to rounding
    // u exp(-kappa chord) - chord exp(-kappa u) = exp(-kappa u) (u expm1(kappa gap) + gap)
    return std::exp(-kappa * u) * (u * std::expm1(kappa * gap) + gap) / (4 * pi * chord * u);
}

/// Exact zero when both arguments lie on the same straight half-line.
inline bool same_straight_half(const ArcLengthCurve& curve, double s, double t) {
    if (curve.is_straight())
        return true;
    const auto [lo, hi] = *curve.straight_range();
    return (s <= lo && t <= lo) || (s >= hi && t >= hi);
}

inline double b_kernel(const ArcLengthCurve& curve, const KernelParams& p, double s, double t) {
    p.validate();
    if (same_straight_half(curve, s, t))
        return 0.0;
    const double k1 = curve.curvature(s);
    const double k2 = curve.curvature(t);
    return b_kernel_points(curve.point(s), curve.point(t), t - s, 0.5 * (k1 * k1 + k2 * k2), p.kappa,
                           p.diagonal_cutoff);
}

/// kappa-derivative of the B kernel away from the diagonal.
inline double b_kernel_dkappa_points(const Vec3& a, const Vec3& b, double u, double gamma_sq_avg, double kappa,
                                     double cutoff) {
    u = std::abs(u);
    if (u == 0.0)
        return 0.0;
    if (u <= cutoff)
        return -gamma_sq_avg * kappa * u * u * u * std::exp(-kappa * u) / (96 * pi);
    const double chord = (a - b).norm();
    const double gap = u - chord;
    // -(exp(-kappa chord) - exp(-kappa u)) / (4 pi)
    return -std::exp(-kappa * u) * std::expm1(kappa * gap) / (4 * pi);
}

/// Fourier symbol of T: (1/2pi)(-ln sqrt(p^2 + kappa^2) + ln 2 + psi(1)).
inline double t_symbol(double kappa, double p) {
    return (-0.5 * std::log(p * p + kappa * kappa) + ln_two + psi_one) / (2 * pi);
}

inline double t_symbol(const KernelParams& params, double p) { return t_symbol(params.kappa, p); }

inline double t_symbol_dkappa(double kappa, double p) { return -kappa / (p * p + kappa * kappa) / (2 * pi); }

/// Discrete frequencies pi k / L in FFT order.
inline std::vector<double> grid_frequencies(std::size_t n, double L) {
    std::vector<double> p(n);
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<std::ptrdiff_t>(k) < half ? static_cast<std::ptrdiff_t>(k)
                                                             : static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(n);
        p[k] = pi * static_cast<double>(kk) / L;
    }
    return p;
}

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

struct TApplication {
    Eigen::VectorXd value;
    /// max(|f_0|, |f_{N-1}|) over max |f|.
    double boundary_magnitude = 0.0;
    bool wraparound = false;
};

/// Periodic spectral realization of T on the grid -L + i h, i < N.
inline TApplication apply_t(const KernelParams& params, const Eigen::VectorXd& f, double L,
                            double wrap_tolerance = 1e-10) {
    params.validate();
    const auto n = static_cast<std::size_t>(f.size());
    if (!is_power_of_two(n))
        throw config_error("apply_t: grid size must be a power of two");
    if (!(L > 0))
        throw config_error("apply_t: L must be positive");
    TApplication out;
    const double scale = f.cwiseAbs().maxCoeff();
    if (scale > 0)
        out.boundary_magnitude = std::max(std::abs(f(0)), std::abs(f(f.size() - 1))) / scale;
    out.wraparound = out.boundary_magnitude > wrap_tolerance;

    Eigen::FFT<double> fft;
    std::vector<double> in(f.data(), f.data() + n);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, in);
    const auto p = grid_frequencies(n, L);
    for (std::size_t k = 0; k < n; ++k)
        spec[k] *= t_symbol(params.kappa, p[k]);
    std::vector<double> back;
    fft.inv(back, spec);
    out.value = Eigen::Map<Eigen::VectorXd>(back.data(), static_cast<Eigen::Index>(n));
    return out;
}

/// CSV rows (p, t(p)).
inline void write_symbol_csv(std::ostream& out, double kappa, const std::vector<double>& p) {
    out << "p,t\n";
    out.precision(17);
    for (double v : p)
        out << v << ',' << t_symbol(kappa, v) << '\n';
}

} // namespace leakywire

#endif
