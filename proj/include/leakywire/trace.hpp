#ifndef LEAKYWIRE_TRACE_HPP
#define LEAKYWIRE_TRACE_HPP

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "birman_schwinger.hpp"
#include "constants.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "linalg.hpp"
#include "spectral.hpp"

namespace leakywire {

enum class Source { Q_on_Gamma, T_on_Sigma };

/// The (+,+) and (-,-) pairs are excluded from the block sum; they cancel
/// against the straight line.
inline bool in_block_sum(Block i, Block j) { return !(i == j && i != Block::M); }

/// Inverses of alpha - Q and alpha - T on one grid.
struct TraceSetup {
    const Discretization* disc = nullptr;
    double alpha = 0.0;
    double kappa = 0.0;
    Matrix q_inverse;
    Matrix t_inverse;
    double sigma_min_q = 0.0;
    double sigma_min_t = 0.0;
    /// Smallest eigenvalue of alpha - Q.
    double min_eigenvalue_q = 0.0;
};

inline TraceSetup make_trace_setup(const Discretization& disc, double alpha, double kappa,
                                   std::optional<double> diagonal_cutoff = std::nullopt) {
    check_coupling(alpha);
    const KernelParams params{kappa, diagonal_cutoff.value_or(default_diagonal_cutoff(disc.h))};
    const BSMatrix q = assemble_Q(disc, params);
    TraceSetup s;
    s.disc = &disc;
    s.alpha = alpha;
    s.kappa = kappa;
    const Resolvent rq(alpha, q.entries);
    // The straight line reuses the same matrix so both inverses agree bitwise.
    const Resolvent rt(alpha, q.t_part);
    s.q_inverse = rq.inverse();
    s.t_inverse = rt.inverse();
    s.sigma_min_q = rq.sigma_min();
    s.sigma_min_t = rt.sigma_min();
    s.min_eigenvalue_q = rq.smallest_eigenvalue();
    return s;
}

struct CancellationResidual {
    double plus = 0.0;
    double minus = 0.0;
};

/// max |(alpha - Q)^{-1} - (alpha - T)^{-1}| on the Gamma_+ and Gamma_- diagonal
/// blocks. T is translation invariant on the periodic grid, so the Sigma
/// block is the same matrix on Gamma's index sets.
inline CancellationResidual cancellation_check(const TraceSetup& s) {
    CancellationResidual out;
    for (Block b : {Block::plus, Block::minus}) {
        const auto& idx = s.disc->block(b);
        const double r = idx.empty() ? 0.0 : (s.q_inverse(idx, idx) - s.t_inverse(idx, idx)).cwiseAbs().maxCoeff();
        (b == Block::plus ? out.plus : out.minus) = r;
    }
    return out;
}

/// One term G_left * K * G_right of the block sum: sum_ab wl_a G(x - P_a)
/// K_ab wr_b G(P_b - y). K holds kernel values, i.e. the inverse block
/// divided by the grid spacing.
struct BlockTerm {
    Block i = Block::plus;
    Block j = Block::minus;
    Source source = Source::Q_on_Gamma;
    double kappa = 0.0;
    Eigen::Matrix3Xd left_points;
    Eigen::Matrix3Xd right_points;
    Eigen::VectorXd left_weights;
    Eigen::VectorXd right_weights;
    Matrix middle;
};

inline BlockTerm block_term(const TraceSetup& s, Block i, Block j, Source source) {
    if (!in_block_sum(i, j))
        throw contract_error(std::string("block (") + block_name(i) + ", " + block_name(j) +
                             ") is not part of the block sum");
    const Discretization& d = *s.disc;
    BlockTerm t;
    t.i = i;
    t.j = j;
    t.source = source;
    t.kappa = s.kappa;
    const bool on_gamma = source == Source::Q_on_Gamma;
    const IndexSet& li = on_gamma ? d.block(i) : d.sigma_block(i);
    const IndexSet& ri = on_gamma ? d.block(j) : d.sigma_block(j);
    auto points_of = [&](const IndexSet& idx) {
        Eigen::Matrix3Xd p(3, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k)
            p.col(static_cast<Eigen::Index>(k)) =
                on_gamma ? Vec3(d.points.col(idx[k])) : Vec3(d.s[static_cast<std::size_t>(idx[k])], 0, 0);
        return p;
    };
    t.left_points = points_of(li);
    t.right_points = points_of(ri);
    t.left_weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(li.size()), d.h);
    t.right_weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ri.size()), d.h);
    t.middle = (on_gamma ? s.q_inverse : s.t_inverse)(li, ri) / d.h;
    return t;
}

namespace detail {

/// Union of two point sets; coincident points with equal weights share a
/// slot. Returns the slot of every input column.
struct MergedPoints {
    Eigen::Matrix3Xd points;
    Eigen::VectorXd weights;
    std::vector<Eigen::Index> slot_a, slot_b;
};

inline MergedPoints merge_points(const Eigen::Matrix3Xd& pa, const Eigen::VectorXd& wa, const Eigen::Matrix3Xd& pb,
                                 const Eigen::VectorXd& wb) {
    std::map<std::array<double, 4>, Eigen::Index> seen;
    std::vector<Vec3> pts;
    std::vector<double> ws;
    auto add = [&](const Vec3& p, double w) {
        const std::array<double, 4> key{p.x(), p.y(), p.z(), w};
        auto [it, fresh] = seen.emplace(key, static_cast<Eigen::Index>(pts.size()));
        if (fresh) {
            pts.push_back(p);
            ws.push_back(w);
        }
        return it->second;
    };
    MergedPoints m;
    for (Eigen::Index k = 0; k < pa.cols(); ++k)
        m.slot_a.push_back(add(pa.col(k), wa(k)));
    for (Eigen::Index k = 0; k < pb.cols(); ++k)
        m.slot_b.push_back(add(pb.col(k), wb(k)));
    m.points.resize(3, static_cast<Eigen::Index>(pts.size()));
    m.weights.resize(static_cast<Eigen::Index>(ws.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) {
        m.points.col(static_cast<Eigen::Index>(k)) = pts[k];
        m.weights(static_cast<Eigen::Index>(k)) = ws[k];
    }
    return m;
}

} // namespace detail

/// Term minus its straight-line counterpart as one factorization on the
/// union of the point sets. Shared points are merged, so identical terms
/// give an exactly zero middle block.
inline BlockTerm difference_term(const BlockTerm& q, const BlockTerm& t) {
    BlockTerm out;
    out.i = q.i;
    out.j = q.j;
    out.kappa = q.kappa;
    const auto left = detail::merge_points(q.left_points, q.left_weights, t.left_points, t.left_weights);
    const auto right = detail::merge_points(q.right_points, q.right_weights, t.right_points, t.right_weights);
    out.left_points = left.points;
    out.left_weights = left.weights;
    out.right_points = right.points;
    out.right_weights = right.weights;
    out.middle = Matrix::Zero(left.points.cols(), right.points.cols());
    for (Eigen::Index b = 0; b < q.middle.cols(); ++b)
        for (Eigen::Index a = 0; a < q.middle.rows(); ++a)
            out.middle(left.slot_a[static_cast<std::size_t>(a)], right.slot_a[static_cast<std::size_t>(b)]) +=
                q.middle(a, b);
    for (Eigen::Index b = 0; b < t.middle.cols(); ++b)
        for (Eigen::Index a = 0; a < t.middle.rows(); ++a)
            out.middle(left.slot_b[static_cast<std::size_t>(a)], right.slot_b[static_cast<std::size_t>(b)]) -=
                t.middle(a, b);
    return out;
}

/// exp(-kappa |P_a - Q_b|) for all pairs.
inline Matrix exponential_kernel(const Eigen::Matrix3Xd& p, const Eigen::Matrix3Xd& q, double kappa) {
    Matrix e(p.cols(), q.cols());
    for (Eigen::Index b = 0; b < q.cols(); ++b)
        for (Eigen::Index a = 0; a < p.cols(); ++a)
            e(a, b) = std::exp(-kappa * (p.col(a) - q.col(b)).norm());
    return e;
}

inline double lemma_prefactor(double kappa) { return 1.0 / (8 * pi * kappa); }

/// Constant printed in the source in front of the limit integrals; kept as an
/// annotation only.
inline double annotated_prefactor(double kappa) { return pi * pi * pi * pi / (kappa * kappa); }

/// delta -> infinity limit of the cut-off trace, through the convolution
/// identity: sum_ab wl_a K_ab wr_b exp(-kappa |P_a - P_b|) / (8 pi kappa).
inline double closed_form_limit(const BlockTerm& t) {
    if (t.middle.size() == 0 || t.middle.isZero(0.0))
        return 0.0;
    const Matrix e = exponential_kernel(t.left_points, t.right_points, t.kappa);
    return lemma_prefactor(t.kappa) *
           (t.left_weights.asDiagonal() * t.middle * t.right_weights.asDiagonal()).cwiseProduct(e).sum();
}

inline Matrix symmetric_sqrt(const Matrix& g) {
    const auto eig = symmetric_eigen(g);
    const Eigen::VectorXd root = eig.values.cwiseMax(0.0).cwiseSqrt();
    return eig.vectors * root.asDiagonal() * eig.vectors.transpose();
}

struct TermNorms {
    double hilbert_schmidt = 0.0;
    /// Grid-level trace-norm surrogate.
    double trace_norm = 0.0;
};

/// Norms of the operator sum_ab wl_a G(. - P_a) K_ab wr_b G(P_b - .) on
/// L^2(R^3), from the Gram matrices of the Green functions.
inline TermNorms term_norms(const BlockTerm& t) {
    if (t.middle.size() == 0 || t.middle.isZero(0.0))
        return {};
    const double c = lemma_prefactor(t.kappa);
    const Matrix gl = symmetric_sqrt(c * exponential_kernel(t.left_points, t.left_points, t.kappa));
    const Matrix gr = symmetric_sqrt(c * exponential_kernel(t.right_points, t.right_points, t.kappa));
    const Matrix x = gl * t.left_weights.asDiagonal() * t.middle * t.right_weights.asDiagonal() * gr;
    return {x.norm(), nuclear_norm(x)};
}

// ---------------------------------------------------------------------------
// Cut-off traces
// ---------------------------------------------------------------------------

struct CutoffOptions {
    /// Radii are these factors divided by kappa.
    std::vector<double> delta_factors{5, 10, 20, 40};
    double tolerance = 1e-9;
    int max_depth = 12;
};

struct CutoffTrace {
    std::vector<double> delta;
    std::vector<double> values;
    double limit = 0.0;
    /// |value(delta_max) - limit| / |limit| (absolute when the limit is 0).
    double gap = 0.0;
    bool monotone = true;
    std::string method;
};

namespace detail {

inline bool on_axis(const Eigen::Matrix3Xd& p) {
    for (Eigen::Index k = 0; k < p.cols(); ++k)
        if (std::hypot(p(1, k), p(2, k)) > 1e-14)
            return false;
    return true;
}

/// Low-rank split W_l K W_r ~ U diag(S) V'.
struct LowRank {
    Matrix u;
    Eigen::VectorXd s;
    Matrix v;
};

inline LowRank compress(const BlockTerm& t) {
    const Matrix m = t.left_weights.asDiagonal() * t.middle * t.right_weights.asDiagonal();
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > 1e-15 * sv(0))
        ++r;
    return {svd.matrixU().leftCols(r), sv.head(r), svd.matrixV().leftCols(r)};
}

/// Integral over the ball of radius delta when every point lies on the
/// x1-axis: cylindrical coordinates (x1, rho), azimuth exact. At fixed rho the
/// x1 integral runs over half-panels between nodes, each mapped by
/// x = c + rho sinh(t) about its nearest node c so the 1/d peak is flat.
inline double cutoff_axisymmetric(const BlockTerm& t, const LowRank& lr, double delta, const CutoffOptions& opt) {
    using outer_rule = boost::math::quadrature::gauss_kronrod<double, 15>;
    using inner_rule = boost::math::quadrature::gauss<double, 20>;
    const double kappa = t.kappa;
    const Eigen::VectorXd xl = t.left_points.row(0).transpose();
    const Eigen::VectorXd xr = t.right_points.row(0).transpose();
    std::vector<double> nodes(xl.data(), xl.data() + xl.size());
    nodes.insert(nodes.end(), xr.data(), xr.data() + xr.size());
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    Eigen::VectorXd gl(xl.size()), gr(xr.size());
    auto density = [&](double x1, double rho) {
        for (Eigen::Index a = 0; a < xl.size(); ++a) {
            const double d = std::hypot(x1 - xl(a), rho);
            gl(a) = std::exp(-kappa * d) / (4 * pi * d);
        }
        for (Eigen::Index b = 0; b < xr.size(); ++b) {
            const double d = std::hypot(x1 - xr(b), rho);
            gr(b) = std::exp(-kappa * d) / (4 * pi * d);
        }
        return (lr.u.transpose() * gl).cwiseProduct(lr.s).dot(lr.v.transpose() * gr);
    };
    auto nearest = [&](double x) {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
        double best = it != nodes.end() ? *it : nodes.back();
        if (it != nodes.begin() && std::abs(*std::prev(it) - x) < std::abs(best - x))
            best = *std::prev(it);
        return best;
    };
    // [e, f] with e the end nearer the peak at node c (c outside or at e).
    auto mapped = [&](double e, double f, double rho) {
        const double c = nearest(e);
        const double dir = f > e ? 1.0 : -1.0;
        const double d0 = std::abs(e - c), d1 = d0 + std::abs(f - e);
        const double sign = (e - c) * dir >= 0 ? 1.0 : -1.0;
        if (sign < 0) // node lies inside (e, f); cannot happen between cuts
            return inner_rule::integrate([&](double x) { return density(x, rho); }, std::min(e, f), std::max(e, f));
        return inner_rule::integrate(
            [&](double tt) {
                return density(c + dir * rho * std::sinh(tt), rho) * rho * std::cosh(tt);
            },
            std::asinh(d0 / rho), std::asinh(d1 / rho));
    };
    auto slab = [&](double rho) {
        if (rho <= 0 || rho >= delta)
            return 0.0;
        const double half = std::sqrt(delta * delta - rho * rho);
        std::vector<double> cuts{-half};
        for (double x : nodes)
            if (x > -half && x < half)
                cuts.push_back(x);
        cuts.push_back(half);
        double sum = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
            sum += mapped(cuts[k], mid, rho) + mapped(cuts[k + 1], mid, rho);
        }
        return 2 * pi * rho * sum;
    };
    // rho-panels graded toward the axis, where the slab integral is
    // logarithmic. Refinement uses one absolute tolerance for the whole ball.
    struct Piece {
        double lo, hi, value, error;
        int depth;
    };
    auto estimate = [&](double lo, double hi, int depth) {
        double err = 0.0;
        const double v = outer_rule::integrate(slab, lo, hi, 0, 0.0, &err);
        return Piece{lo, hi, v, err, depth};
    };
    std::vector<Piece> pieces;
    double lo = 0.0;
    for (double hi : {1e-6 * delta, 1e-4 * delta, 1e-3 * delta, 1e-2 * delta, 1e-1 * delta, 0.5 * delta, delta}) {
        pieces.push_back(estimate(lo, hi, 0));
        lo = hi;
    }
    double scale = 0.0;
    for (const auto& p : pieces)
        scale += std::abs(p.value);
    const double budget = opt.tolerance * std::max(scale, std::numeric_limits<double>::min());
    double total = 0.0;
    while (!pieces.empty()) {
        const Piece p = pieces.back();
        pieces.pop_back();
        const double share = budget * (p.hi - p.lo) / delta;
        if (p.error <= std::max(share, 1e-3 * budget) || p.depth >= opt.max_depth) {
            total += p.value;
            continue;
        }
        const double mid = 0.5 * (p.lo + p.hi);
        pieces.push_back(estimate(p.lo, mid, p.depth + 1));
        pieces.push_back(estimate(mid, p.hi, p.depth + 1));
    }
    return total;
}

/// General points: nested adaptive quadrature in spherical coordinates about
/// the origin. Intended for small point sets.
inline double cutoff_general(const BlockTerm& t, const LowRank& lr, double delta, const CutoffOptions& opt) {
    using rule = boost::math::quadrature::gauss_kronrod<double, 15>;
    const double kappa = t.kappa;
    Eigen::VectorXd gl(t.left_points.cols()), gr(t.right_points.cols());
    auto density = [&](const Vec3& x) {
        for (Eigen::Index a = 0; a < gl.size(); ++a) {
            const double d = (x - t.left_points.col(a)).norm();
            gl(a) = d > 0 ? std::exp(-kappa * d) / (4 * pi * d) : 0.0;
        }
        for (Eigen::Index b = 0; b < gr.size(); ++b) {
            const double d = (x - t.right_points.col(b)).norm();
            gr(b) = d > 0 ? std::exp(-kappa * d) / (4 * pi * d) : 0.0;
        }
        return (lr.u.transpose() * gl).cwiseProduct(lr.s).dot(lr.v.transpose() * gr);
    };
    const auto depth = static_cast<unsigned>(opt.max_depth);
    const double tol = std::max(opt.tolerance, 1e-7);
    // Radial breakpoints at the point distances.
    std::vector<double> cuts{0.0};
    for (Eigen::Index a = 0; a < t.left_points.cols(); ++a)
        cuts.push_back(t.left_points.col(a).norm());
    for (Eigen::Index b = 0; b < t.right_points.cols(); ++b)
        cuts.push_back(t.right_points.col(b).norm());
    cuts.push_back(delta);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [delta](double c) { return c > delta; }), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto shell = [&](double r) {
        auto ring = [&](double u) {
            const double sin_t = std::sqrt(std::max(0.0, 1 - u * u));
            return rule::integrate(
                [&](double phi) {
                    return density(Vec3(r * sin_t * std::cos(phi), r * sin_t * std::sin(phi), r * u));
                },
                0.0, 2 * pi, depth, tol);
        };
        return r * r * rule::integrate(ring, -1.0, 1.0, depth, tol);
    };
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        total += rule::integrate(shell, cuts[k], cuts[k + 1], depth, tol);
    return total;
}

} // namespace detail

/// Diagonal integrals of the cut-off operator over balls of growing radius,
/// compared with the closed-form limit.
inline CutoffTrace cutoff_trace(const BlockTerm& t, const CutoffOptions& opt = {}) {
    CutoffTrace out;
    out.limit = closed_form_limit(t);
    if (t.middle.size() == 0 || t.middle.cwiseAbs().maxCoeff() == 0.0) {
        out.method = "empty";
        for (double f : opt.delta_factors) {
            out.delta.push_back(f / t.kappa);
            out.values.push_back(0.0);
        }
        return out;
    }
    if (!std::is_sorted(opt.delta_factors.begin(), opt.delta_factors.end()))
        throw config_error("delta schedule must be increasing");
    const bool axis = detail::on_axis(t.left_points) && detail::on_axis(t.right_points);
    out.method = axis ? "axisymmetric" : "spherical";
    const auto lr = detail::compress(t);
    for (double f : opt.delta_factors) {
        const double delta = f / t.kappa;
        const double v = axis ? detail::cutoff_axisymmetric(t, lr, delta, opt) : detail::cutoff_general(t, lr, delta, opt);
        if (!std::isfinite(v))
            throw accuracy_error("cut-off trace quadrature failed", v, std::numeric_limits<double>::infinity());
        if (!out.values.empty() && std::abs(v) < std::abs(out.values.back()) * (1 - 1e-9))
            out.monotone = false;
        out.delta.push_back(delta);
        out.values.push_back(v);
    }
    const double last = out.values.back();
    out.gap = out.limit != 0.0 ? std::abs(last - out.limit) / std::abs(out.limit) : std::abs(last);
    return out;
}

// ---------------------------------------------------------------------------
// Bounds and report
// ---------------------------------------------------------------------------

struct TermBound {
    double value = 0.0;
    std::string kind;
};

/// Bound on |closed_form_limit(t)| following the source's chain: Schwarz with
/// the operator norm of the middle block for tail-to-tail terms, the
/// L^2 -> L^1 imbedding over the finite part otherwise.
inline TermBound term_bound(const BlockTerm& t, const Discretization& disc) {
    TermBound out;
    if (t.middle.size() == 0)
        return {0.0, "empty"};
    const double pre = lemma_prefactor(t.kappa);
    const bool tails = t.i != Block::M && t.j != Block::M;
    if (tails) {
        // exp(-kappa |x_a - x_b|) = u_a u_b with u = exp(-kappa |x - c|), c between the tails
        const double c = t.source == Source::Q_on_Gamma
                             ? ((disc.x_minus <= 0 && 0 <= disc.x_plus) ? 0.0 : 0.5 * (disc.x_minus + disc.x_plus))
                             : 0.0;
        auto l2 = [&](const Eigen::Matrix3Xd& p, const Eigen::VectorXd& w) {
            double sum = 0.0;
            for (Eigen::Index a = 0; a < p.cols(); ++a) {
                const double u = std::exp(-t.kappa * std::abs(p(0, a) - c));
                sum += w(a) * u * u;
            }
            return std::sqrt(sum);
        };
        // operator norm of the block acting on L^2 with the grid weights
        const Matrix op = t.left_weights.cwiseSqrt().asDiagonal() * t.middle * t.right_weights.cwiseSqrt().asDiagonal();
        out.value = pre * spectral_norm(op) * l2(t.left_points, t.left_weights) * l2(t.right_points, t.right_weights);
        out.kind = "schwarz";
        return out;
    }
    const Matrix e = exponential_kernel(t.left_points, t.right_points, t.kappa);
    const Matrix k = t.middle.cwiseProduct(e);
    // g over the M side, integrated against the other side's weights
    Eigen::VectorXd g, w;
    if (t.i == Block::M) {
        g = k * t.right_weights;
        w = t.left_weights;
    } else {
        g = k.transpose() * t.left_weights;
        w = t.right_weights;
    }
    const double length = w.sum();
    out.value = pre * std::sqrt(length) * std::sqrt(w.dot(g.cwiseAbs2()));
    out.kind = "imbedding";
    return out;
}

struct BlockReport {
    Block i = Block::plus;
    Block j = Block::minus;
    double limit_q = 0.0;
    double limit_t = 0.0;
    double limit_difference = 0.0;
    TermBound bound_q;
    TermBound bound_t;
    bool within_bound = true;
    TermNorms norms_difference;
    std::optional<CutoffTrace> cutoff;
};

struct TraceOptions {
    std::optional<double> diagonal_cutoff;
    /// Run the cut-off quadrature on blocks whose points all lie on the axis.
    bool cutoff_quadrature = false;
    CutoffOptions cutoff;
    /// Relative slack for the limit <= bound comparison (rounding only).
    double bound_slack = 1e-12;
    /// Scan for the smallest kappa with alpha - Q > 0, in steps of this factor.
    double kappa_check_step = 1.02;
};

struct TraceReport {
    double kappa = 0.0;
    double alpha = 0.0;
    std::vector<BlockReport> blocks;
    CancellationResidual cancellation;
    double prefactor = 0.0;
    double annotated_prefactor = 0.0;
    std::string prefactor_note;
    double min_eigenvalue = 0.0;
    bool positive = false;
    std::optional<double> kappa_check;
    double symmetry_defect = 0.0;
    bool all_within_bounds = true;
    std::vector<std::string> notices;
};

/// Smallest scanned kappa >= kappa_alpha (1 + 1e-3) where alpha - Q^kappa > 0.
inline std::optional<double> positivity_threshold(const Discretization& disc, double alpha, double kappa_max,
                                                  double step, std::optional<double> cutoff = std::nullopt) {
    const double c = cutoff.value_or(default_diagonal_cutoff(disc.h));
    for (double k = kappa_alpha(alpha) * 1.001; k <= kappa_max * (1 + 1e-12); k *= step) {
        const auto top = top_symmetric_eigen(assemble_Q(disc, {k, c}).entries, 1);
        if (top.values(0) < alpha)
            return k;
    }
    return std::nullopt;
}

inline TraceReport trace_bound_report(const Discretization& disc, double alpha, double kappa,
                                      const TraceOptions& opt = {}) {
    const TraceSetup s = make_trace_setup(disc, alpha, kappa, opt.diagonal_cutoff);
    TraceReport r;
    r.kappa = kappa;
    r.alpha = alpha;
    r.prefactor = lemma_prefactor(kappa);
    r.annotated_prefactor = annotated_prefactor(kappa);
    r.prefactor_note = "limits use 1/(8 pi kappa) from the convolution identity; pi^4/kappa^2 is the constant "
                       "printed in the source derivation and is reported for reference only";
    r.cancellation = cancellation_check(s);
    r.min_eigenvalue = s.min_eigenvalue_q;
    r.positive = s.min_eigenvalue_q > 0;
    r.kappa_check = positivity_threshold(disc, alpha, kappa, opt.kappa_check_step, opt.diagonal_cutoff);
    if (!r.positive)
        r.notices.push_back("alpha - Q is not positive at this kappa");

    const double tiny = std::numeric_limits<double>::min();
    for (Block i : all_blocks) {
        for (Block j : all_blocks) {
            if (!in_block_sum(i, j))
                continue;
            BlockReport b;
            b.i = i;
            b.j = j;
            const BlockTerm tq = block_term(s, i, j, Source::Q_on_Gamma);
            const BlockTerm tt = block_term(s, i, j, Source::T_on_Sigma);
            const BlockTerm diff = difference_term(tq, tt);
            b.limit_q = closed_form_limit(tq);
            b.limit_t = closed_form_limit(tt);
            b.limit_difference = closed_form_limit(diff);
            b.bound_q = term_bound(tq, disc);
            b.bound_t = term_bound(tt, disc);
            b.within_bound = std::abs(b.limit_q) <= b.bound_q.value * (1 + opt.bound_slack) + tiny &&
                             std::abs(b.limit_t) <= b.bound_t.value * (1 + opt.bound_slack) + tiny;
            b.norms_difference = term_norms(diff);
            if (opt.cutoff_quadrature && detail::on_axis(tq.left_points) && detail::on_axis(tq.right_points)) {
                // the inverse is symmetric, so (j, i) has the same diagonal integral
                for (const auto& prev : r.blocks)
                    if (prev.i == j && prev.j == i && prev.cutoff)
                        b.cutoff = prev.cutoff;
                if (!b.cutoff)
                    b.cutoff = cutoff_trace(tq, opt.cutoff);
            }
            if (!b.within_bound) {
                r.all_within_bounds = false;
                r.notices.push_back(std::string("bound violated on block (") + block_name(i) + ", " + block_name(j) +
                                    "): refine the grid");
            }
            r.blocks.push_back(std::move(b));
        }
    }
    // Total difference on the concatenated evaluation points.
    {
        const auto n = static_cast<Eigen::Index>(disc.N);
        Matrix mid = Matrix::Zero(2 * n, 2 * n);
        for (Block i : all_blocks)
            for (Block j : all_blocks) {
                if (!in_block_sum(i, j))
                    continue;
                const auto& gi = disc.block(i);
                const auto& gj = disc.block(j);
                const auto& si = disc.sigma_block(i);
                const auto& sj = disc.sigma_block(j);
                for (std::size_t a = 0; a < gi.size(); ++a)
                    for (std::size_t c = 0; c < gj.size(); ++c)
                        mid(gi[a], gj[c]) = s.q_inverse(gi[a], gj[c]);
                for (std::size_t a = 0; a < si.size(); ++a)
                    for (std::size_t c = 0; c < sj.size(); ++c)
                        mid(n + si[a], n + sj[c]) = -s.t_inverse(si[a], sj[c]);
            }
        const double scale = mid.cwiseAbs().maxCoeff();
        r.symmetry_defect = scale > 0 ? (mid - mid.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
    }
    return r;
}

struct HsSweep {
    std::vector<double> L;
    std::vector<double> hs_norm;
    /// |hs(L_k) - hs(L_{k-1})| / hs(L_k), zero when both vanish.
    std::vector<double> decrement;
};

/// ||B||_HS^2 = sum_ij w_i w_j b(s_i, s_j)^2 on grids of fixed spacing.
inline HsSweep hs_norm_B(const ArcLengthCurve& curve, double kappa, const std::vector<double>& L_schedule,
                         double spacing, std::optional<double> diagonal_cutoff = std::nullopt) {
    if (!std::is_sorted(L_schedule.begin(), L_schedule.end()))
        throw config_error("L schedule must be increasing");
    HsSweep out;
    for (double L : L_schedule) {
        std::size_t n = 8;
        while (2 * L / static_cast<double>(n) > spacing * (1 + 1e-12))
            n *= 2;
        const Discretization d = make_discretization(curve, L, n);
        const Matrix B = assemble_B(d, {kappa, diagonal_cutoff.value_or(default_diagonal_cutoff(d.h))});
        const double hs = B.norm();
        if (!out.hs_norm.empty()) {
            const double prev = out.hs_norm.back();
            out.decrement.push_back(hs > 0 ? std::abs(hs - prev) / hs : std::abs(hs - prev));
        }
        out.L.push_back(L);
        out.hs_norm.push_back(hs);
    }
    return out;
}

} // namespace leakywire

#endif
