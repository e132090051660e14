#ifndef LEAKYWIRE_GEOMETRY_HPP
#define LEAKYWIRE_GEOMETRY_HPP

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "constants.hpp"
#include "error.hpp"

namespace leakywire {

using Vec3 = Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Curve families
// ---------------------------------------------------------------------------

struct StraightLine {};

/// Graph x -> (x, a exp(-x^2/w^2), 0). The Gaussian is cut to exactly zero
/// where it drops below 1e-17 * max(1, a), which makes the deformation compact.
struct PlanarBump {
    double amplitude = 1.0;
    double width = 1.0;
};

/// Planar C^1 joint of three circular arcs of one radius turning by
/// +bend/2, -bend, +bend/2. Mirror symmetric about s = 0 and flat outside
/// |s| <= 2 * radius * bend.
struct CircularArcJoint {
    double bend_angle = pi / 3;
    double radius = 1.0;
};

/// Arbitrary C^1 map. Outside [t_begin, t_end] the curve is continued along
/// its end tangents. Derivatives are optional; central differences are used
/// when absent.
struct UserParametric {
    std::function<Vec3(double)> map;
    double t_begin = -1.0;
    double t_end = 1.0;
    std::function<Vec3(double)> derivative;
    std::function<Vec3(double)> second_derivative;
};

struct CurveSpec {
    std::variant<StraightLine, PlanarBump, CircularArcJoint, UserParametric> family;
    /// Radius of a ball known to contain the deformed part, if any.
    std::optional<double> deformation_bound;
};

inline const char* family_name(const CurveSpec& spec) {
    static constexpr const char* names[] = {"straight_line", "planar_bump", "circular_arc_joint", "user_parametric"};
    return names[spec.family.index()];
}

struct Frame {
    Vec3 tangent;
    Vec3 binormal;
    Vec3 normal;
};

struct ReparamOptions {
    /// Returned grid covers [-half_length, half_length]; 0 picks the
    /// deformation extent plus a margin of 5.
    double half_length = 0.0;
    /// Reject curves that do not coincide with the x1-axis outside a window.
    bool require_compact = true;
};

namespace detail {

struct ParametricMap {
    std::function<Vec3(double)> r;
    std::function<Vec3(double)> dr;
    std::function<Vec3(double)> ddr;
    double t_begin = 0.0;
    double t_end = 0.0;
    double t_origin = 0.0;
};

inline ParametricMap make_map(const StraightLine&) {
    return {[](double t) { return Vec3(t, 0, 0); }, [](double) { return Vec3(1, 0, 0); },
            [](double) { return Vec3(0, 0, 0); }, -1.0, 1.0, 0.0};
}

inline ParametricMap make_map(const PlanarBump& b) {
    if (!(b.width > 0) || !std::isfinite(b.width) || !std::isfinite(b.amplitude))
        throw config_error("planar_bump: width must be positive and amplitude finite");
    const double a = b.amplitude;
    const double w = b.width;
    const double floor = 1e-17 * std::max(1.0, std::abs(a));
    const double cut = std::abs(a) > floor ? w * std::sqrt(std::log(std::abs(a) / floor)) : w;
    auto height = [a, w, cut](double x) { return std::abs(x) >= cut ? 0.0 : a * std::exp(-x * x / (w * w)); };
    return {[height](double x) { return Vec3(x, height(x), 0); },
            [height, w](double x) { return Vec3(1, -2 * x / (w * w) * height(x), 0); },
            [height, w](double x) {
                return Vec3(0, (4 * x * x / (w * w * w * w) - 2 / (w * w)) * height(x), 0);
            },
            -cut, cut, 0.0};
}

/// Three-arc joint parametrized directly by arc length. Signed curvature is
/// +1/R, -1/R, +1/R on the pieces split at |s| = R b/2; heading is odd in s so
/// the shape is mirror symmetric.
inline ParametricMap make_map(const CircularArcJoint& j) {
    if (!(j.radius > 0) || !(j.bend_angle > 0) || j.bend_angle > pi || !std::isfinite(j.radius))
        throw config_error("circular_arc_joint: need radius > 0 and bend_angle in (0, pi]");
    const double R = j.radius;
    const double th = j.bend_angle;
    const double s1 = R * th / 2;  // inner joints at +-s1
    const double s2 = R * th;      // outer joints at +-s2
    // Position for s <= 0 relative to the centre point; mirrored for s > 0.
    // Middle arc around the apex: heading psi(s) = -s/R, centre of curvature
    // below the apex.
    auto left = [R, th, s1, s2](double s) -> Vec3 {
        // s in [-s2, 0]
        if (s >= -s1) {
            const double psi = -s / R;
            return Vec3(R * std::sin(-psi), R * (std::cos(psi) - 1.0), 0);
        }
        // outer arc: heading rises from 0 at -s2 to th/2 at -s1
        const double psi1 = th / 2;
        const Vec3 p1(-R * std::sin(psi1), R * (std::cos(psi1) - 1.0), 0);
        const double u = s + s1;  // <= 0, measured back from the inner joint
        const double psi = psi1 + u / R;
        return Vec3(p1.x() + R * (std::sin(psi) - std::sin(psi1)), p1.y() - R * (std::cos(psi) - std::cos(psi1)), 0);
    };
    // Apex height above the axis so that the ends sit on x2 = 0.
    const double lift = -left(-s2).y();
    const double x_end = -left(-s2).x();
    auto point = [left, lift, s2, x_end](double s) -> Vec3 {
        if (s <= -s2)
            return Vec3(-x_end + (s + s2), 0, 0);
        if (s >= s2)
            return Vec3(x_end + (s - s2), 0, 0);
        Vec3 p = s <= 0 ? left(s) : left(-s);
        if (s > 0)
            p.x() = -p.x();
        p.y() += lift;
        return p;
    };
    auto heading = [R, s1, s2, th](double s) {
        const double a = std::abs(s);
        double psi;
        if (a >= s2)
            psi = 0.0;
        else if (a <= s1)
            psi = -a / R;
        else
            psi = -th / 2 + (a - s1) / R;
        // heading is odd in s: negative side mirrors positive side
        return s < 0 ? -psi : psi;
    };
    auto curvature_sign = [s1, s2](double s) {
        const double a = std::abs(s);
        if (a >= s2)
            return 0.0;
        return a <= s1 ? -1.0 : 1.0;
    };
    return {point,
            [heading](double s) {
                const double psi = heading(s);
                return Vec3(std::cos(psi), std::sin(psi), 0);
            },
            [heading, curvature_sign, R](double s) -> Vec3 {
                const double psi = heading(s);
                return Vec3(-std::sin(psi), std::cos(psi), 0) * (curvature_sign(s) / R);
            },
            -s2, s2, 0.0};
}

inline ParametricMap make_map(const UserParametric& u) {
    if (!u.map)
        throw config_error("user_parametric: map is empty");
    if (!(u.t_end > u.t_begin))
        throw config_error("user_parametric: t_end must exceed t_begin");
    const double step = 1e-5 * std::max(1.0, u.t_end - u.t_begin);
    auto dr = u.derivative ? u.derivative : std::function<Vec3(double)>([m = u.map, step](double t) {
        return Vec3((m(t + step) - m(t - step)) / (2 * step));
    });
    const double step2 = 1e-4 * std::max(1.0, u.t_end - u.t_begin);
    auto ddr = u.second_derivative ? u.second_derivative : std::function<Vec3(double)>([m = u.map, step2](double t) {
        return Vec3((m(t + step2) - 2 * m(t) + m(t - step2)) / (step2 * step2));
    });
    return {u.map, dr, ddr, u.t_begin, u.t_end, std::clamp(0.0, u.t_begin, u.t_end)};
}

inline double gauss_kronrod(const std::function<double(double)>& f, double a, double b) {
    if (a == b)
        return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0);
}

/// Parallel transport of `reference` along the polyline by double reflection.
inline std::vector<Vec3> transport_normals(const std::vector<Vec3>& pts, const std::vector<Vec3>& tan, Vec3 reference) {
    std::vector<Vec3> out(pts.size());
    out[0] = reference;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec3 v1 = pts[i + 1] - pts[i];
        const double c1 = v1.squaredNorm();
        Vec3 rl = out[i];
        Vec3 tl = tan[i];
        if (c1 > 0) {
            rl -= (2 / c1) * v1.dot(out[i]) * v1;
            tl -= (2 / c1) * v1.dot(tan[i]) * v1;
        }
        const Vec3 v2 = tan[i + 1] - tl;
        const double c2 = v2.squaredNorm();
        Vec3 r = c2 > 1e-300 ? Vec3(rl - (2 / c2) * v2.dot(rl) * v2) : rl;
        r -= r.dot(tan[i + 1]) * tan[i + 1];
        out[i + 1] = r.normalized();
    }
    return out;
}

inline Vec3 any_perpendicular(const Vec3& t) {
    Vec3 seed = std::abs(t.y()) < 0.9 ? Vec3(0, 1, 0) : Vec3(0, 0, 1);
    return (seed - seed.dot(t) * t).normalized();
}

inline Vec3 rotate_about(const Vec3& v, const Vec3& axis, double angle) {
    return v * std::cos(angle) + axis.cross(v) * std::sin(angle) + axis * axis.dot(v) * (1 - std::cos(angle));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Arc-length curve
// ---------------------------------------------------------------------------

/// A curve reparametrized by arc length, with rotated Frenet frames and
/// curvature. Evaluation works for every s; outside the tabulated window the
/// curve is the straight continuation along the end tangents.
class ArcLengthCurve {
public:
    // Samples on the uniform output grid.
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<Vec3>& points() const { return points_; }
    const std::vector<Vec3>& tangents() const { return tangents_; }
    const std::vector<Vec3>& binormals() const { return binormals_; }
    const std::vector<Vec3>& normals() const { return normals_; }
    const std::vector<double>& curvatures() const { return curvatures_; }

    /// (s_-, s_+) outside which Gamma lies on the x1-axis; empty for a
    /// straight line.
    const std::optional<std::pair<double, double>>& straight_range() const { return straight_range_; }
    bool is_straight() const { return !straight_range_.has_value(); }
    /// Arc length of the deformed part; 0 for the straight line.
    double deformed_length() const {
        return straight_range_ ? straight_range_->second - straight_range_->first : 0.0;
    }
    double max_curvature() const { return max_curvature_; }
    double spacing() const { return grid_.size() > 1 ? grid_[1] - grid_[0] : 0.0; }
    double window_begin() const { return s_begin_; }
    double window_end() const { return s_end_; }

    Vec3 point(double s) const {
        if (s <= s_begin_)
            return p_begin_ + (s - s_begin_) * t_begin_;
        if (s >= s_end_)
            return p_end_ + (s - s_end_) * t_end_;
        return map_.r(parameter(s));
    }

    Vec3 tangent(double s) const {
        if (s <= s_begin_)
            return t_begin_;
        if (s >= s_end_)
            return t_end_;
        return map_.dr(parameter(s)).normalized();
    }

    double curvature(double s) const {
        if (s <= s_begin_ || s >= s_end_)
            return 0.0;
        const double t = parameter(s);
        const Vec3 d1 = map_.dr(t);
        const double sp = d1.norm();
        return d1.cross(map_.ddr(t)).norm() / (sp * sp * sp);
    }

    /// Rotated frame at s: linear interpolation of the transported normal
    /// table, re-orthonormalized against the exact tangent.
    Frame frame(double s) const {
        const Vec3 t = tangent(s);
        Vec3 n;
        if (s <= frame_s0_) {
            n = frame_normals_.front();
        } else if (s >= frame_s0_ + frame_ds_ * static_cast<double>(frame_normals_.size() - 1)) {
            n = frame_normals_.back();
        } else {
            const double u = (s - frame_s0_) / frame_ds_;
            const auto k = static_cast<std::size_t>(std::floor(u));
            const double f = u - static_cast<double>(k);
            n = (1 - f) * frame_normals_[k] + f * frame_normals_[std::min(k + 1, frame_normals_.size() - 1)];
        }
        n -= n.dot(t) * t;
        n.normalize();
        return {t, t.cross(n), n};
    }

    /// Parameter value of the underlying map at arc length s (inside the window).
    double parameter(double s) const {
        s = std::clamp(s, s_begin_, s_end_);
        const auto it = std::upper_bound(table_s_.begin(), table_s_.end(), s);
        std::size_t k = it == table_s_.begin() ? 0 : static_cast<std::size_t>(it - table_s_.begin()) - 1;
        k = std::min(k, table_s_.size() - 2);
        const double s0 = table_s_[k];
        const double s1 = table_s_[k + 1];
        const double t0 = table_t_[k];
        const double t1 = table_t_[k + 1];
        const double ds = s1 - s0;
        const double x = (s - s0) / ds;
        // cubic Hermite in s with slopes dt/ds = 1/|r'|
        const double m0 = ds / table_speed_[k];
        const double m1 = ds / table_speed_[k + 1];
        const double h00 = (1 + 2 * x) * (1 - x) * (1 - x);
        const double h10 = x * (1 - x) * (1 - x);
        const double h01 = x * x * (3 - 2 * x);
        const double h11 = x * x * (x - 1);
        double t = h00 * t0 + h10 * m0 + h01 * t1 + h11 * m1;
        t = std::clamp(t, t0, t1);
        // Newton polish on the cumulative length
        for (int it_count = 0; it_count < 3; ++it_count) {
            const double length =
                s0 + detail::gauss_kronrod([this](double tau) { return map_.dr(tau).norm(); }, t0, t);
            const double speed = map_.dr(t).norm();
            const double step = (length - s) / speed;
            t = std::clamp(t - step, t0, t1);
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(t)))
                break;
        }
        return t;
    }

    /// Axis coordinates x_- and x_+ where Gamma leaves and rejoins the axis.
    std::pair<double, double> axis_junctions() const {
        if (!straight_range_)
            return {0.0, 0.0};
        return {point(straight_range_->first).x(), point(straight_range_->second).x()};
    }

    /// CSV rows (s, x, y, z, gamma) on the output grid.
    void write_csv(std::ostream& out) const {
        out << "s,x,y,z,gamma\n";
        out.precision(17);
        for (std::size_t i = 0; i < grid_.size(); ++i)
            out << grid_[i] << ',' << points_[i].x() << ',' << points_[i].y() << ',' << points_[i].z() << ','
                << curvatures_[i] << '\n';
    }

private:
    friend ArcLengthCurve reparametrize_arclength(const CurveSpec&, double, ReparamOptions);

    detail::ParametricMap map_;
    std::vector<double> table_t_, table_s_, table_speed_;
    double s_begin_ = 0.0, s_end_ = 0.0;
    Vec3 p_begin_, p_end_, t_begin_, t_end_;

    double frame_s0_ = 0.0, frame_ds_ = 1.0;
    std::vector<Vec3> frame_normals_;

    std::vector<double> grid_;
    std::vector<Vec3> points_, tangents_, binormals_, normals_;
    std::vector<double> curvatures_;
    std::optional<std::pair<double, double>> straight_range_;
    double max_curvature_ = 0.0;
};

/// Arc-length resampling of a curve family.
///
/// The cumulative length is tabulated with Gauss-Kronrod panels on a fine
/// parameter grid; inversion is cubic Hermite in s followed by Newton
/// polishing on the same panels.
inline ArcLengthCurve reparametrize_arclength(const CurveSpec& spec, double target_spacing,
                                              ReparamOptions options = {}) {
    if (!(target_spacing > 0) || !std::isfinite(target_spacing))
        throw config_error("target_spacing must be positive and finite");

    ArcLengthCurve c;
    c.map_ = std::visit([](const auto& f) { return detail::make_map(f); }, spec.family);
    const auto& m = c.map_;
    const bool straight_family = std::holds_alternative<StraightLine>(spec.family);
    const bool user_family = std::holds_alternative<UserParametric>(spec.family);

    // Preliminary length for choosing the table resolution.
    constexpr int coarse = 512;
    double coarse_length = 0.0;
    for (int i = 0; i < coarse; ++i) {
        const double a = m.t_begin + (m.t_end - m.t_begin) * i / coarse;
        const double b = m.t_begin + (m.t_end - m.t_begin) * (i + 1) / coarse;
        coarse_length += detail::gauss_kronrod([&m](double t) { return m.dr(t).norm(); }, a, b);
    }
    const double fine_ds = std::min(target_spacing / 4, 0.01);
    const auto n_table = static_cast<std::size_t>(
        std::clamp(std::ceil(coarse_length / fine_ds), double(coarse), 200000.0));

    c.table_t_.resize(n_table + 1);
    c.table_s_.resize(n_table + 1);
    c.table_speed_.resize(n_table + 1);
    for (std::size_t i = 0; i <= n_table; ++i) {
        const double t = m.t_begin + (m.t_end - m.t_begin) * static_cast<double>(i) / static_cast<double>(n_table);
        c.table_t_[i] = t;
        const double sp = m.dr(t).norm();
        if (!(sp > 1e-10) || !std::isfinite(sp))
            throw geometry_error("degenerate map: vanishing speed", t);
        c.table_speed_[i] = sp;
    }
    c.table_s_[0] = 0.0;
    for (std::size_t i = 0; i < n_table; ++i)
        c.table_s_[i + 1] = c.table_s_[i] + detail::gauss_kronrod([&m](double t) { return m.dr(t).norm(); },
                                                                   c.table_t_[i], c.table_t_[i + 1]);
    // Arc length origin at t_origin.
    const double origin_offset = [&] {
        const auto it = std::upper_bound(c.table_t_.begin(), c.table_t_.end(), m.t_origin);
        const std::size_t k = std::min<std::size_t>(
            it == c.table_t_.begin() ? 0 : static_cast<std::size_t>(it - c.table_t_.begin()) - 1, n_table - 1);
        return c.table_s_[k] +
               detail::gauss_kronrod([&m](double t) { return m.dr(t).norm(); }, c.table_t_[k], m.t_origin);
    }();
    for (auto& s : c.table_s_)
        s -= origin_offset;
    c.s_begin_ = c.table_s_.front();
    c.s_end_ = c.table_s_.back();

    c.p_begin_ = m.r(m.t_begin);
    c.p_end_ = m.r(m.t_end);
    c.t_begin_ = m.dr(m.t_begin).normalized();
    c.t_end_ = m.dr(m.t_end).normalized();

    // Compactness: both ends on the x1-axis, heading along +x1.
    const double scale = std::max(1.0, std::max(c.p_begin_.norm(), c.p_end_.norm()));
    auto on_axis = [scale](const Vec3& p) { return std::hypot(p.y(), p.z()) <= 1e-12 * scale; };
    auto along_axis = [](const Vec3& t) { return (t - Vec3(1, 0, 0)).norm() <= 1e-10; };
    const bool compact = on_axis(c.p_begin_) && on_axis(c.p_end_) && along_axis(c.t_begin_) && along_axis(c.t_end_);
    if (options.require_compact) {
        if (!compact)
            throw geometry_error("non-compact deformation: curve does not rejoin the x1-axis at the window ends",
                                 on_axis(c.p_begin_) && along_axis(c.t_begin_) ? m.t_end : m.t_begin);
        if (user_family) {
            // The map itself must continue along the axis beyond the window.
            const double span = m.t_end - m.t_begin;
            for (double k : {0.25, 1.0, 4.0}) {
                for (double t : {m.t_end + k * span, m.t_begin - k * span}) {
                    const Vec3 p = m.r(t);
                    if (std::hypot(p.y(), p.z()) > 1e-8 * std::max(1.0, p.norm()))
                        throw geometry_error("non-compact deformation: image leaves the x1-axis outside the window", t);
                }
            }
        }
        c.p_begin_.y() = c.p_begin_.z() = 0.0;
        c.p_end_.y() = c.p_end_.z() = 0.0;
        c.t_begin_ = c.t_end_ = Vec3(1, 0, 0);
    }

    // Deformed range: tabulated stretch that is off the axis or bent.
    if (!straight_family) {
        std::optional<std::size_t> first, last;
        for (std::size_t i = 0; i <= n_table; ++i) {
            const double t = c.table_t_[i];
            const Vec3 p = m.r(t);
            const Vec3 d = m.dr(t) / c.table_speed_[i];
            const bool off = std::hypot(p.y(), p.z()) > 1e-13 * scale || (d - Vec3(1, 0, 0)).norm() > 1e-12;
            if (off) {
                if (!first)
                    first = i;
                last = i;
            }
        }
        if (!compact && !options.require_compact)
            c.straight_range_ = std::make_pair(c.s_begin_, c.s_end_);
        else if (first)
            c.straight_range_ = std::make_pair(c.table_s_[first ? (*first > 0 ? *first - 1 : 0) : 0],
                                               c.table_s_[std::min(*last + 1, n_table)]);
        // Built-in families know their exact window.
        if (c.straight_range_ && !user_family)
            c.straight_range_ = std::make_pair(c.s_begin_, c.s_end_);
    }

    if (spec.deformation_bound && c.straight_range_) {
        const double bound = *spec.deformation_bound;
        for (std::size_t i = 0; i <= n_table; ++i) {
            const Vec3 p = m.r(c.table_t_[i]);
            if (std::hypot(p.y(), p.z()) > 0 && p.norm() > bound)
                throw geometry_error("non-compact deformation: off-axis point outside deformation_bound",
                                     c.table_t_[i]);
        }
    }

    // Frame table, uniform in s.
    {
        const double ds = std::min(target_spacing / 4, 0.01);
        const auto n = static_cast<std::size_t>(std::max(2.0, std::ceil((c.s_end_ - c.s_begin_) / ds))) + 1;
        c.frame_s0_ = c.s_begin_;
        c.frame_ds_ = (c.s_end_ - c.s_begin_) / static_cast<double>(n - 1);
        std::vector<Vec3> pts(n), tan(n);
        std::vector<double> kap(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = c.frame_s0_ + c.frame_ds_ * static_cast<double>(i);
            pts[i] = c.point(s);
            tan[i] = c.tangent(s);
            kap[i] = c.curvature(s);
        }
        auto normals = detail::transport_normals(pts, tan, detail::any_perpendicular(tan[0]));
        // Align with the Frenet normal at the first bent sample.
        for (std::size_t i = 0; i < n; ++i) {
            if (kap[i] > 1e-8) {
                const double t = c.parameter(c.frame_s0_ + c.frame_ds_ * static_cast<double>(i));
                Vec3 acc = m.ddr(t);
                acc -= acc.dot(tan[i]) * tan[i];
                const Vec3 frenet = acc.normalized();
                const double angle =
                    std::atan2(tan[i].dot(normals[i].cross(frenet)), normals[i].dot(frenet));
                for (std::size_t j = 0; j < n; ++j)
                    normals[j] = detail::rotate_about(normals[j], tan[j], angle);
                break;
            }
        }
        c.frame_normals_ = std::move(normals);
    }

    // Output grid.
    double H = options.half_length;
    if (!(H > 0))
        H = std::max(std::abs(c.s_begin_), std::abs(c.s_end_)) + 5.0;
    const auto cells = static_cast<std::size_t>(std::max(1.0, std::round(2 * H / target_spacing)));
    const double h = 2 * H / static_cast<double>(cells);
    for (std::size_t i = 0; i <= cells; ++i) {
        const double s = -H + h * static_cast<double>(i);
        const Frame f = c.frame(s);
        c.grid_.push_back(s);
        c.points_.push_back(c.point(s));
        c.tangents_.push_back(f.tangent);
        c.binormals_.push_back(f.binormal);
        c.normals_.push_back(f.normal);
        const double k = c.curvature(s);
        c.curvatures_.push_back(k);
    }
    for (std::size_t i = 0; i <= n_table; ++i) {
        const double t = c.table_t_[i];
        const Vec3 d1 = m.dr(t);
        const double sp = d1.norm();
        c.max_curvature_ = std::max(c.max_curvature_, d1.cross(m.ddr(t)).norm() / (sp * sp * sp));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Hypothesis checks
// ---------------------------------------------------------------------------

struct PairSampler {
    /// Pairs closer than this in arc length are skipped; the ratio tends to 1.
    double min_separation = 1e-3;
    /// Floor below which a ratio counts as a self-intersection.
    double floor = 1e-6;
    /// Extra samples placed on the straight continuations, log spaced out to
    /// this distance beyond the window.
    double far_extent = 1e4;
    int far_samples = 24;
};

struct BilipschitzResult {
    double c_estimate = 1.0;
    bool pass = true;
    /// Pair with the smallest ratio; infinite entries mean the asymptotic
    /// limit of far pairs was the minimum.
    double s_first = 0.0;
    double s_second = 0.0;
    std::string message;
};

/// Samples of arc length used by the pairwise checks: the output grid plus
/// log-spaced points on the straight continuations.
inline std::vector<double> pair_samples(const ArcLengthCurve& curve, const PairSampler& sampler) {
    std::vector<double> s = curve.grid();
    const double lo = std::min(curve.window_begin(), s.front());
    const double hi = std::max(curve.window_end(), s.back());
    for (int k = 0; k < sampler.far_samples; ++k) {
        const double d = std::pow(sampler.far_extent, (k + 1.0) / sampler.far_samples);
        s.push_back(lo - d);
        s.push_back(hi + d);
    }
    std::sort(s.begin(), s.end());
    return s;
}

/// Estimate of the lower Lipschitz constant c in |G(s)-G(s')| >= c|s-s'|.
inline BilipschitzResult check_bilipschitz(const ArcLengthCurve& curve, const PairSampler& sampler = {}) {
    BilipschitzResult out;
    const auto s = pair_samples(curve, sampler);
    std::vector<Vec3> p(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        p[i] = curve.point(s[i]);
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            const double ds = s[j] - s[i];
            if (ds < sampler.min_separation)
                continue;
            const double ratio = (p[j] - p[i]).norm() / ds;
            if (ratio < out.c_estimate) {
                out.c_estimate = ratio;
                out.s_first = s[i];
                out.s_second = s[j];
            }
        }
    }
    // Far pairs on opposite continuations: the ratio tends to the distance
    // from the origin to the segment [t_-, t_+].
    const Vec3 ta = curve.tangent(curve.window_begin() - 1);
    const Vec3 tb = curve.tangent(curve.window_end() + 1);
    const Vec3 d = tb - ta;
    const double lambda = d.squaredNorm() > 0 ? std::clamp(-ta.dot(d) / d.squaredNorm(), 0.0, 1.0) : 0.0;
    const double asymptotic = (ta + lambda * d).norm();
    if (asymptotic < out.c_estimate) {
        out.c_estimate = asymptotic;
        out.s_first = -std::numeric_limits<double>::infinity();
        out.s_second = std::numeric_limits<double>::infinity();
    }
    out.c_estimate = std::min(out.c_estimate, 1.0);
    out.pass = out.c_estimate >= sampler.floor && out.c_estimate <= 1.0;
    if (!out.pass)
        out.message = std::isinf(out.s_first)
                          ? "ratio tends to zero on far pairs (U-shaped continuation)"
                          : "self-intersection: ratio below floor";
    return out;
}

struct AsymptoticParams {
    double omega = 0.5;
    double epsilon = 1.0;
    double mu = 1.0;
    double d = 1.0;
};

struct AsymptoticResult {
    bool pass = true;
    double worst_s = 0.0;
    double worst_s_prime = 0.0;
    /// min over sampled pairs of (right-hand side - left-hand side)
    double worst_margin = std::numeric_limits<double>::infinity();
    std::size_t pairs_tested = 0;
};

/// Membership in the set S_{omega,eps} of comparable pairs.
inline bool in_comparable_set(double s, double sp, double omega, double eps) {
    const double threshold = eps * (1 + omega) / (1 - omega);
    const double sum = std::abs(s + sp);
    if (sum > threshold) {
        if (sp == 0.0)
            return false;
        const double q = s / sp;
        return omega < q && q < 1 / omega;
    }
    if (sum < threshold)
        return std::abs(s - sp) < eps;
    return false;
}

/// Sampled check of the asymptotic straightness inequality on S_{omega,eps}.
inline AsymptoticResult check_asymptotic_condition(const ArcLengthCurve& curve, const AsymptoticParams& q) {
    if (!(q.omega > 0 && q.omega < 1) || !(q.epsilon > 0) || !(q.mu >= 0) || !std::isfinite(q.d))
        throw config_error("asymptotic condition parameters out of range");
    AsymptoticResult out;
    const auto& s = curve.grid();
    const auto& p = curve.points();
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (i == j || !in_comparable_set(s[i], s[j], q.omega, q.epsilon))
                continue;
            const double ds = std::abs(s[i] - s[j]);
            const double lhs = 1.0 - (p[i] - p[j]).norm() / ds;
            const double rhs =
                q.d * ds / ((ds + 1) * std::sqrt(1 + std::pow(s[i] * s[i] + s[j] * s[j], q.mu)));
            const double margin = rhs - lhs;
            ++out.pairs_tested;
            if (margin < out.worst_margin) {
                out.worst_margin = margin;
                out.worst_s = s[i];
                out.worst_s_prime = s[j];
            }
        }
    }
    if (out.pairs_tested == 0)
        throw config_error("no sampled pair lies in S_{omega,eps}; refine the curve grid");
    out.pass = out.worst_margin >= -1e-14;
    return out;
}

/// Tubular radius estimate: min(1/(2 max curvature), half the smallest
/// distance between points more than a half-turn apart along the curve).
inline double tubular_radius(const ArcLengthCurve& curve) {
    const double kmax = curve.max_curvature();
    if (kmax <= 0)
        return std::numeric_limits<double>::infinity();
    const double apart = pi / kmax;
    double self = std::numeric_limits<double>::infinity();
    const auto& s = curve.grid();
    const auto& p = curve.points();
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j)
            if (s[j] - s[i] > apart)
                self = std::min(self, (p[j] - p[i]).norm());
    return std::min(1 / (2 * kmax), self / 2);
}

struct ShiftedPoint {
    Vec3 point;
    /// Set when r reaches the tubular radius estimate; the shifted curve may
    /// then meet Gamma.
    std::optional<std::string> warning;
};

/// Gamma(s) + xi b(s) + eta n(s).
inline ShiftedPoint shifted_curve_point(const ArcLengthCurve& curve, double s, double xi, double eta,
                                        std::optional<double> r0 = std::nullopt) {
    const Frame f = curve.frame(s);
    ShiftedPoint out{curve.point(s) + xi * f.binormal + eta * f.normal, std::nullopt};
    const double radius = r0 ? *r0 : tubular_radius(curve);
    if (std::hypot(xi, eta) >= radius)
        out.warning = "shift radius " + std::to_string(std::hypot(xi, eta)) + " reaches tubular radius estimate " +
                      std::to_string(radius);
    return out;
}

} // namespace leakywire

#endif
