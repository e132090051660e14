#ifndef LEAKYWIRE_BIRMAN_SCHWINGER_HPP
#define LEAKYWIRE_BIRMAN_SCHWINGER_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "linalg.hpp"

namespace leakywire {

enum class Block { minus = 0, M = 1, plus = 2 };

inline constexpr std::array<Block, 3> all_blocks{Block::minus, Block::M, Block::plus};

inline const char* block_name(Block b) {
    switch (b) {
    case Block::minus:
        return "minus";
    case Block::M:
        return "M";
    case Block::plus:
        return "plus";
    }
    return "?";
}

using IndexSet = std::vector<Eigen::Index>;

/// Uniform periodic grid s_i = -L + i h on [-L, L), h = 2L/N, with the
/// curve's points sampled once.
struct Discretization {
    double L = 0.0;
    std::size_t N = 0;
    double h = 0.0;
    std::vector<double> s;
    std::vector<double> weights;
    /// Index partitions of Gamma (by arc length against s_-, s_+) and of Sigma
    /// (by the axis coordinate against x_-, x_+).
    std::array<IndexSet, 3> gamma_blocks;
    std::array<IndexSet, 3> sigma_blocks;
    double s_minus = 0.0, s_plus = 0.0;
    double x_minus = 0.0, x_plus = 0.0;
    /// Gamma(s_i) and curvature squared, column i.
    Eigen::Matrix3Xd points;
    Eigen::VectorXd curvature_sq;
    bool straight = true;

    const IndexSet& block(Block b) const { return gamma_blocks[static_cast<int>(b)]; }
    const IndexSet& sigma_block(Block b) const { return sigma_blocks[static_cast<int>(b)]; }
    double weight_sum(Block b) const { return h * static_cast<double>(block(b).size()); }
};

/// Builds the grid for a curve. The deformed window must sit strictly inside
/// (-L, L).
inline Discretization make_discretization(const ArcLengthCurve& curve, double L, std::size_t N) {
    if (!(L > 0) || !std::isfinite(L))
        throw config_error("disc.L must be positive and finite");
    if (!is_power_of_two(N) || N < 8)
        throw config_error("disc.N must be a power of two and at least 8");
    Discretization d;
    d.L = L;
    d.N = N;
    d.h = 2 * L / static_cast<double>(N);
    d.s.resize(N);
    d.weights.assign(N, d.h);
    d.points.resize(3, static_cast<Eigen::Index>(N));
    d.curvature_sq.resize(static_cast<Eigen::Index>(N));
    d.straight = curve.is_straight();
    if (!d.straight) {
        std::tie(d.s_minus, d.s_plus) = *curve.straight_range();
        std::tie(d.x_minus, d.x_plus) = curve.axis_junctions();
        if (!(d.s_minus > -L && d.s_plus < L))
            throw config_error("curve deformation [" + std::to_string(d.s_minus) + ", " + std::to_string(d.s_plus) +
                               "] does not fit inside (-L, L)");
        if (!(d.x_minus > -L && d.x_plus < L))
            throw config_error("axis junctions do not fit inside (-L, L)");
    }
    for (std::size_t i = 0; i < N; ++i) {
        const double s = -L + d.h * static_cast<double>(i);
        d.s[i] = s;
        const auto ii = static_cast<Eigen::Index>(i);
        d.points.col(ii) = curve.point(s);
        const double k = curve.curvature(s);
        d.curvature_sq(ii) = k * k;
        // Straight line: minus = {s < 0}, plus = {s >= 0}, M empty.
        int g, x;
        if (d.straight) {
            g = x = s < 0 ? 0 : 2;
        } else {
            g = s < d.s_minus ? 0 : (s > d.s_plus ? 2 : 1);
            x = s < d.x_minus ? 0 : (s > d.x_plus ? 2 : 1);
        }
        d.gamma_blocks[static_cast<std::size_t>(g)].push_back(ii);
        d.sigma_blocks[static_cast<std::size_t>(x)].push_back(ii);
    }
    return d;
}

/// Dense realization of Q = T + B on a Discretization, parts kept separately.
struct BSMatrix {
    double kappa = 0.0;
    Matrix t_part;
    Matrix b_part;
    Matrix entries;
};

/// B_ij = w_j b(s_i, s_j). Pairs on one straight half-line are exact zeros.
inline Matrix assemble_B(const Discretization& disc, const KernelParams& params, bool kappa_derivative = false) {
    params.validate(disc.h);
    const auto n = static_cast<Eigen::Index>(disc.N);
    Matrix B = Matrix::Zero(n, n);
    if (disc.straight)
        return B;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double sj = disc.s[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < j; ++i) {
            const double si = disc.s[static_cast<std::size_t>(i)];
            if ((si <= disc.s_minus && sj <= disc.s_minus) || (si >= disc.s_plus && sj >= disc.s_plus))
                continue;
            const double g2 = 0.5 * (disc.curvature_sq(i) + disc.curvature_sq(j));
            const double v = kappa_derivative
                                 ? b_kernel_dkappa_points(disc.points.col(i), disc.points.col(j), sj - si, g2,
                                                          params.kappa, params.diagonal_cutoff)
                                 : b_kernel_points(disc.points.col(i), disc.points.col(j), sj - si, g2, params.kappa,
                                                   params.diagonal_cutoff);
            B(i, j) = B(j, i) = disc.h * v;
        }
    }
    return B;
}

/// Circulant column c_m = (1/N) sum_k m(p_k) exp(2 pi i k m / N) of a symmetric
/// multiplier sampled at the grid frequencies.
template <class Multiplier>
inline Eigen::VectorXd circulant_column(std::size_t n, double L, Multiplier&& multiplier) {
    const auto p = grid_frequencies(n, L);
    std::vector<std::complex<double>> spec(n);
    for (std::size_t k = 0; k < n; ++k)
        spec[k] = multiplier(p[k]);
    Eigen::FFT<double> fft;
    std::vector<double> col;
    fft.inv(col, spec);
    return Eigen::Map<Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(n));
}

inline Matrix circulant_matrix(const Eigen::VectorXd& c) {
    const auto n = c.size();
    Matrix out(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            out(i, j) = c((i - j + n) % n);
    return out;
}

/// Matrix of apply_t in the grid basis.
inline Matrix assemble_T(const Discretization& disc, const KernelParams& params, bool kappa_derivative = false) {
    params.validate();
    const double kappa = params.kappa;
    const auto c = kappa_derivative
                       ? circulant_column(disc.N, disc.L, [kappa](double p) { return t_symbol_dkappa(kappa, p); })
                       : circulant_column(disc.N, disc.L, [kappa](double p) { return t_symbol(kappa, p); });
    return circulant_matrix(c);
}

inline BSMatrix assemble_Q(const Discretization& disc, const KernelParams& params) {
    BSMatrix q;
    q.kappa = params.kappa;
    q.t_part = assemble_T(disc, params);
    q.b_part = assemble_B(disc, params);
    q.entries = q.t_part + q.b_part;
    return q;
}

/// dQ/dkappa, used for Newton steps on eigenvalue branches.
inline Matrix assemble_Q_dkappa(const Discretization& disc, const KernelParams& params) {
    Matrix d = assemble_T(disc, params, true);
    if (!disc.straight)
        d += assemble_B(disc, params, true);
    return d;
}

/// The uniform trapezoid weights make the weight-symmetrized matrix equal to
/// the Nystrom matrix itself.
inline Matrix symmetrized(const Matrix& m, const Discretization& disc) {
    Eigen::VectorXd sw(static_cast<Eigen::Index>(disc.N));
    for (std::size_t i = 0; i < disc.N; ++i)
        sw(static_cast<Eigen::Index>(i)) = std::sqrt(disc.weights[i]);
    return sw.asDiagonal() * m * sw.cwiseInverse().asDiagonal();
}

struct EigenPair {
    double mu = 0.0;
    /// Grid function with sum_i w_i phi_i^2 = 1.
    Eigen::VectorXd phi;
    double residual = 0.0;
};

/// Largest-magnitude entry made positive.
inline void fix_sign(Eigen::VectorXd& v) {
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    if (v(k) < 0)
        v = -v;
}

/// k algebraically largest eigenpairs, descending.
inline std::vector<EigenPair> top_eigenpairs(const Matrix& q, const Discretization& disc, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > disc.N)
        throw contract_error("top_eigenpairs: k outside [1, N]");
    const auto eig = top_symmetric_eigen(q, k);
    std::vector<EigenPair> out;
    const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd v = eig.vectors.col(i);
        fix_sign(v);
        const double mu = eig.values(i);
        const double residual = (q * v - mu * v).norm();
        if (!(residual < 1e-8 * std::max(std::abs(mu), 1e-3 * scale)))
            throw numeric_error("eigenpair " + std::to_string(i) + " residual " + std::to_string(residual) +
                                " too large");
        out.push_back({mu, v / std::sqrt(disc.h), residual});
    }
    return out;
}

inline std::vector<EigenPair> top_eigenpairs(const BSMatrix& q, const Discretization& disc, int k) {
    return top_eigenpairs(q.entries, disc, k);
}

/// Singular-value floor separating an invertible pencil from a bound state.
inline constexpr double singular_floor = 1e-10;

/// Full inverse of alpha - Q from its eigendecomposition.
class Resolvent {
public:
    Resolvent(double alpha, const Matrix& q) {
        const auto eig = symmetric_eigen(q);
        const Eigen::VectorXd gap = (alpha - eig.values.array()).matrix();
        sigma_min_ = gap.cwiseAbs().minCoeff();
        if (!(sigma_min_ > singular_floor))
            throw singular_error("alpha - Q is numerically singular", sigma_min_);
        inverse_ = eig.vectors * gap.cwiseInverse().asDiagonal() * eig.vectors.transpose();
        inverse_ = 0.5 * (inverse_ + inverse_.transpose());
        smallest_eigenvalue_ = gap.minCoeff();
    }

    const Matrix& inverse() const { return inverse_; }
    double sigma_min() const { return sigma_min_; }
    /// Smallest eigenvalue of alpha - Q (positive iff alpha - Q > 0).
    double smallest_eigenvalue() const { return smallest_eigenvalue_; }

    Matrix block(const IndexSet& rows, const IndexSet& cols) const { return inverse_(rows, cols); }

    Matrix block(const Discretization& disc, Block i, Block j) const {
        return inverse_(disc.block(i), disc.block(j));
    }

private:
    Matrix inverse_;
    double sigma_min_ = 0.0;
    double smallest_eigenvalue_ = 0.0;
};

inline Matrix resolvent_block(double alpha, const BSMatrix& q, const Discretization& disc, Block i, Block j) {
    return Resolvent(alpha, q.entries).block(disc, i, j);
}

/// Places block (i, j) back into an N x N matrix of zeros.
inline Matrix embed_block(const Matrix& blk, const Discretization& disc, Block i, Block j) {
    const auto n = static_cast<Eigen::Index>(disc.N);
    Matrix out = Matrix::Zero(n, n);
    out(disc.block(i), disc.block(j)) = blk;
    return out;
}

struct LowerBoundResult {
    std::vector<double> kappas;
    std::vector<double> sigma_min;
    std::vector<double> excluded;
    std::vector<std::string> notices;
    double fitted_c = 0.0;
    double fit_residual = 0.0;
    bool pass = false;
};

/// sigma_min(alpha - Q^kappa) along an increasing kappa list, with the
/// least-squares fit sigma ~ C ln kappa over the larger half of the list.
template <class QFactory>
inline LowerBoundResult lower_bound_check(double alpha, const std::vector<double>& kappa_list, QFactory&& make_q) {
    if (kappa_list.empty() || !std::is_sorted(kappa_list.begin(), kappa_list.end()))
        throw config_error("kappa list must be non-empty and increasing");
    LowerBoundResult out;
    for (double kappa : kappa_list) {
        const Matrix q = make_q(kappa);
        const Eigen::VectorXd ev = symmetric_eigenvalues(q);
        const double sigma = (alpha - ev.array()).abs().minCoeff();
        if (!(sigma > singular_floor)) {
            out.excluded.push_back(kappa);
            out.notices.push_back("kappa = " + std::to_string(kappa) + " excluded: alpha - Q singular");
            continue;
        }
        out.kappas.push_back(kappa);
        out.sigma_min.push_back(sigma);
    }
    const std::size_t n = out.kappas.size();
    if (n == 0)
        return out;
    const std::size_t first = n / 2;
    double num = 0.0, den = 0.0, norm2 = 0.0;
    for (std::size_t i = first; i < n; ++i) {
        const double lk = std::log(out.kappas[i]);
        num += out.sigma_min[i] * lk;
        den += lk * lk;
        norm2 += out.sigma_min[i] * out.sigma_min[i];
    }
    out.fitted_c = den > 0 ? num / den : 0.0;
    double res2 = 0.0;
    for (std::size_t i = first; i < n; ++i) {
        const double e = out.sigma_min[i] - out.fitted_c * std::log(out.kappas[i]);
        res2 += e * e;
    }
    out.fit_residual = norm2 > 0 ? std::sqrt(res2 / norm2) : 0.0;
    out.pass = out.fitted_c > 0 && out.fit_residual < 0.2;
    return out;
}

inline LowerBoundResult lower_bound_check(const Discretization& disc, double alpha,
                                          const std::vector<double>& kappa_list, double diagonal_cutoff) {
    return lower_bound_check(alpha, kappa_list, [&](double kappa) {
        return assemble_Q(disc, KernelParams{kappa, diagonal_cutoff}).entries;
    });
}

/// Dense binary layout: uint64 N, float64 kappa, float64 L, then N*N float64
/// in row-major order, all little-endian as produced on the host.
inline void write_matrix_binary(std::ostream& out, const Matrix& m, double kappa, double L) {
    if (m.rows() != m.cols())
        throw contract_error("write_matrix_binary: matrix must be square");
    const auto n = static_cast<std::uint64_t>(m.rows());
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&kappa), sizeof kappa);
    out.write(reinterpret_cast<const char*>(&L), sizeof L);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

struct MatrixFile {
    double kappa = 0.0;
    double L = 0.0;
    Matrix m;
};

inline MatrixFile read_matrix_binary(std::istream& in) {
    std::uint64_t n = 0;
    MatrixFile f;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&f.kappa), sizeof f.kappa);
    in.read(reinterpret_cast<char*>(&f.L), sizeof f.L);
    if (!in || n > (1u << 16))
        throw config_error("malformed matrix file header");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
    if (!in)
        throw config_error("truncated matrix file");
    f.m = rm;
    return f;
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
    out.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
}

} // namespace leakywire

#endif
