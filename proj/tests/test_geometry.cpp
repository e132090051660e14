#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <leakywire/geometry.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace leakywire;

namespace {

template <class F>
CurveSpec spec(F family) {
    CurveSpec c;
    c.family = std::move(family);
    return c;
}

ArcLengthCurve arc(double bend = pi / 3, double radius = 1.0, double spacing = 0.05) {
    return reparametrize_arclength(spec(CircularArcJoint{bend, radius}), spacing);
}

ArcLengthCurve bump(double a = 1.0, double w = 1.0, double spacing = 0.05) {
    return reparametrize_arclength(spec(PlanarBump{a, w}), spacing);
}

// U-shape: semicircle (sin t, cos t, 0), t in [0, pi], continued along the
// end tangents, which point in opposite directions.
ArcLengthCurve u_shape() {
    UserParametric u;
    u.map = [](double t) { return Vec3(std::sin(t), std::cos(t), 0); };
    u.derivative = [](double t) { return Vec3(std::cos(t), -std::sin(t), 0); };
    u.second_derivative = [](double t) { return Vec3(-std::sin(t), -std::cos(t), 0); };
    u.t_begin = 0;
    u.t_end = pi;
    ReparamOptions opt;
    opt.require_compact = false;
    return reparametrize_arclength(spec(u), 0.05, opt);
}

void expect_curve_invariants(const ArcLengthCurve& c) {
    const auto& s = c.grid();
    const auto& p = c.points();
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            const double ds = s[j] - s[i];
            ASSERT_LE((p[j] - p[i]).norm(), ds + 1e-8 * std::max(1.0, ds)) << s[i] << " " << s[j];
        }
    const double h = c.spacing();
    for (std::size_t i = 0; i < s.size(); ++i) {
        Eigen::Matrix3d g;
        g << c.tangents()[i].transpose(), c.binormals()[i].transpose(), c.normals()[i].transpose();
        ASSERT_LT((g * g.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-8) << s[i];
        if (i > 0) {
            // largest rotation angle between consecutive frames
            const Eigen::Matrix3d r = g * (Eigen::Matrix3d() << c.tangents()[i - 1].transpose(),
                                           c.binormals()[i - 1].transpose(), c.normals()[i - 1].transpose())
                                              .finished()
                                              .transpose();
            const double angle = std::acos(std::clamp((r.trace() - 1) / 2, -1.0, 1.0));
            ASSERT_LT(angle, 10 * h * (c.curvatures()[i] + 1)) << s[i];
        }
    }
}

} // namespace

TEST(Reparametrize, StraightLineIsIdentity) {
    const auto c = reparametrize_arclength(spec(StraightLine{}), 0.1);
    EXPECT_TRUE(c.is_straight());
    EXPECT_FALSE(c.straight_range().has_value());
    EXPECT_EQ(c.deformed_length(), 0.0);
    for (std::size_t i = 0; i < c.grid().size(); ++i) {
        EXPECT_NEAR((c.points()[i] - Vec3(c.grid()[i], 0, 0)).norm(), 0.0, 1e-12);
        EXPECT_EQ(c.curvatures()[i], 0.0);
    }
    EXPECT_EQ(c.point(123.5), Vec3(123.5, 0, 0));
}

TEST(Reparametrize, SpacingWithinTenPercent) {
    for (double target : {0.02, 0.05, 0.1, 0.3}) {
        const auto c = arc(pi / 3, 1.0, target);
        EXPECT_LT(std::abs(c.spacing() - target) / target, 0.1) << target;
    }
}

TEST(Reparametrize, UnitSpeedByFiniteDifferences) {
    for (const auto& c : {arc(), bump(), arc(pi / 2, 0.5)}) {
        const auto& s = c.grid();
        const double e = 1e-5;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            const double m = 0.5 * (s[i] + s[i + 1]);
            const double speed = (c.point(m + e) - c.point(m - e)).norm() / (2 * e);
            ASSERT_NEAR(speed, 1.0, 1e-8) << m;
        }
    }
}

TEST(Reparametrize, BumpLengthMatchesGraphIntegral) {
    const auto c = bump(1.0, 1.0);
    const auto [lo, hi] = *c.straight_range();
    const double x0 = c.point(lo).x();
    const double x1 = c.point(hi).x();
    // y = exp(-x^2), y' = -2x exp(-x^2)
    auto speed = [](double x) {
        const double dy = -2 * x * std::exp(-x * x);
        return std::sqrt(1 + dy * dy);
    };
    const double length = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(speed, x0, x1, 20, 1e-13);
    EXPECT_NEAR(c.deformed_length(), length, 1e-8);
    EXPECT_GT(c.deformed_length(), x1 - x0);
}

TEST(Reparametrize, ArcCurvatureIsOneOnArcsZeroOnLines) {
    const double bend = pi / 4, radius = 1.0;
    const auto c = arc(bend, radius);
    const double joint = radius * bend;  // end of the outer arcs
    for (std::size_t i = 0; i < c.grid().size(); ++i) {
        const double s = std::abs(c.grid()[i]);
        if (std::abs(s - joint) < 0.05 || std::abs(s - joint / 2) < 0.05)
            continue;
        EXPECT_NEAR(c.curvatures()[i], s < joint ? 1 / radius : 0.0, 1e-6) << c.grid()[i];
    }
    EXPECT_NEAR(c.max_curvature(), 1 / radius, 1e-6);
}

TEST(Reparametrize, ArcEndsOnAxis) {
    const auto c = arc();
    const auto [xm, xp] = c.axis_junctions();
    EXPECT_NEAR(xm, -1.0, 1e-9);
    EXPECT_NEAR(xp, 1.0, 1e-9);
    const Vec3 far = c.point(50);
    EXPECT_NEAR(far.y(), 0.0, 1e-12);
    EXPECT_NEAR(far.z(), 0.0, 1e-12);
}

TEST(Reparametrize, RejectsVanishingSpeed) {
    UserParametric u;
    u.map = [](double t) { return Vec3(t * t * t, 0, 0); };
    u.derivative = [](double t) { return Vec3(3 * t * t, 0, 0); };
    u.t_begin = -1;
    u.t_end = 1;
    EXPECT_THROW(reparametrize_arclength(spec(u), 0.05), geometry_error);
}

TEST(Reparametrize, RejectsNonCompactDeformation) {
    UserParametric u;
    u.map = [](double t) { return Vec3(t, 0.1 * t, 0); };
    u.t_begin = -1;
    u.t_end = 1;
    EXPECT_THROW(reparametrize_arclength(spec(u), 0.05), geometry_error);
    UserParametric v;
    // off axis beyond the window although the ends sit on it
    v.map = [](double t) { return Vec3(t, std::abs(t) > 1 ? 0.3 : 0.0, 0); };
    v.derivative = [](double) { return Vec3(1, 0, 0); };
    v.t_begin = -1;
    v.t_end = 1;
    EXPECT_THROW(reparametrize_arclength(spec(v), 0.05), geometry_error);
}

TEST(Reparametrize, DeformationBoundIsEnforced) {
    CurveSpec b = spec(PlanarBump{1.0, 1.0});
    b.deformation_bound = 1.0;
    EXPECT_THROW(reparametrize_arclength(b, 0.05), geometry_error);
    b.deformation_bound = 10.0;
    EXPECT_NO_THROW(reparametrize_arclength(b, 0.05));
}

TEST(Reparametrize, InvariantsOnBuiltins) {
    expect_curve_invariants(arc());
    expect_curve_invariants(arc(pi / 2, 1.0));
    expect_curve_invariants(bump());
    expect_curve_invariants(reparametrize_arclength(spec(StraightLine{}), 0.1));
}

TEST(Reparametrize, InvariantsOnRandomBumps) {
    std::mt19937 gen(20240611);
    std::uniform_real_distribution<double> amp(-2.0, 2.0), width(0.4, 2.0), bend(0.1, 2.0), rad(0.3, 2.0);
    for (int k = 0; k < 6; ++k) {
        const auto b = bump(amp(gen), width(gen), 0.08);
        expect_curve_invariants(b);
        EXPECT_TRUE(check_bilipschitz(b).pass);
        const auto a = arc(bend(gen), rad(gen), 0.08);
        expect_curve_invariants(a);
        EXPECT_TRUE(check_bilipschitz(a).pass);
    }
}

TEST(Reparametrize, SampledUserCurveMatchesBuiltin) {
    // a user map that is the bump graph itself
    UserParametric u;
    u.map = [](double t) { return Vec3(t, std::exp(-t * t), 0); };
    u.derivative = [](double t) { return Vec3(1, -2 * t * std::exp(-t * t), 0); };
    u.t_begin = -7;
    u.t_end = 7;
    const auto c = reparametrize_arclength(spec(u), 0.05);
    const auto b = bump();
    for (double s : {-2.0, -0.5, 0.0, 0.7, 3.0})
        EXPECT_NEAR((c.point(s) - b.point(s)).norm(), 0.0, 1e-7) << s;
}

TEST(Bilipschitz, StraightLineHasConstantOne) {
    const auto r = check_bilipschitz(reparametrize_arclength(spec(StraightLine{}), 0.1));
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.c_estimate, 1.0, 1e-12);
}

TEST(Bilipschitz, RightAngleJointAgreesWithDenseSampling) {
    const auto c = arc(pi / 2, 1.0);
    const auto r = check_bilipschitz(c);
    EXPECT_TRUE(r.pass);
    EXPECT_GT(r.c_estimate, 0.0);
    EXPECT_LT(r.c_estimate, 1.0);
    // independent oracle on a denser grid
    double oracle = 1.0;
    std::vector<double> s;
    for (double x = -12; x <= 12; x += 0.02)
        s.push_back(x);
    std::vector<Vec3> p;
    for (double x : s)
        p.push_back(c.point(x));
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j)
            oracle = std::min(oracle, (p[j] - p[i]).norm() / (s[j] - s[i]));
    EXPECT_NEAR(r.c_estimate, oracle, 5e-3);
}

TEST(Bilipschitz, UShapeFailsOnFarPairs) {
    const auto r = check_bilipschitz(u_shape());
    EXPECT_FALSE(r.pass);
    EXPECT_LT(r.c_estimate, 1e-6);
    EXPECT_TRUE(std::isinf(r.s_first));
}

TEST(Asymptotic, StraightLinePassesWithZeroLeftSide) {
    const auto c = reparametrize_arclength(spec(StraightLine{}), 0.1, {10.0, true});
    for (double mu : {0.0, 0.6, 2.0}) {
        const auto r = check_asymptotic_condition(c, {0.5, 1.0, mu, 0.3});
        EXPECT_TRUE(r.pass);
        EXPECT_GE(r.worst_margin, 0.0);
    }
}

TEST(Asymptotic, ThresholdDMatchesSampledOracle) {
    const auto c = bump(1.0, 1.0, 0.1);
    const AsymptoticParams base{0.5, 1.0, 1.0, 0.0};
    // oracle: smallest d making every sampled pair admissible
    const auto& s = c.grid();
    const auto& p = c.points();
    double needed = 0.0;
    const double thr = base.epsilon * (1 + base.omega) / (1 - base.omega);
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (i == j)
                continue;
            const double sum = std::abs(s[i] + s[j]);
            bool member = false;
            if (sum > thr)
                member = s[j] != 0 && s[i] / s[j] > base.omega && s[i] / s[j] < 1 / base.omega;
            else if (sum < thr)
                member = std::abs(s[i] - s[j]) < base.epsilon;
            if (!member)
                continue;
            const double ds = std::abs(s[i] - s[j]);
            const double lhs = 1 - (p[i] - p[j]).norm() / ds;
            needed = std::max(needed, lhs * (ds + 1) * std::sqrt(1 + (s[i] * s[i] + s[j] * s[j])) / ds);
        }
    ASSERT_GT(needed, 0.0);
    auto q = base;
    q.d = 1.01 * needed;
    EXPECT_TRUE(check_asymptotic_condition(c, q).pass);
    q.d = 0.99 * needed;
    EXPECT_FALSE(check_asymptotic_condition(c, q).pass);
    q.d = 0.0;
    EXPECT_FALSE(check_asymptotic_condition(c, q).pass);
}

TEST(Asymptotic, EmptySampleIsConfigurationError) {
    const auto c = bump(1.0, 1.0, 0.05);
    EXPECT_THROW(check_asymptotic_condition(c, {0.999999, 1e-4, 1.0, 1.0}), config_error);
    EXPECT_THROW(check_asymptotic_condition(c, {1.5, 1.0, 1.0, 1.0}), config_error);
}

TEST(ComparableSet, Membership) {
    EXPECT_TRUE(in_comparable_set(10, 11, 0.5, 1.0));
    EXPECT_FALSE(in_comparable_set(10, 30, 0.5, 1.0));
    EXPECT_TRUE(in_comparable_set(0.1, -0.2, 0.5, 1.0));
    EXPECT_FALSE(in_comparable_set(0.1, -2.0, 0.5, 1.0));
}

TEST(ShiftedPoint, ZeroShiftIsCurvePoint) {
    const auto c = bump();
    for (double s : {-1.0, 0.0, 0.4})
        EXPECT_EQ(shifted_curve_point(c, s, 0, 0).point, c.point(s));
}

TEST(ShiftedPoint, StraightLineDistanceFromAxis) {
    const auto c = reparametrize_arclength(spec(StraightLine{}), 0.1);
    const auto p = shifted_curve_point(c, 0.0, 0.3, 0.4);
    EXPECT_NEAR(std::hypot(p.point.y(), p.point.z()), 0.5, 1e-14);
    EXPECT_NEAR(p.point.x(), 0.0, 1e-14);
    EXPECT_FALSE(p.warning);
}

TEST(ShiftedPoint, DistanceToBumpIsShiftRadius) {
    const auto c = bump();
    const double kmax = c.max_curvature();
    for (double s0 : {-0.8, 0.0, 0.5, 1.3}) {
        for (double r : {1e-3, 1e-2, 5e-2}) {
            const Vec3 x = shifted_curve_point(c, s0, 0.6 * r, 0.8 * r).point;
            // nearest point by dense search followed by golden-section refinement
            double best = s0, dmin = 1e300;
            for (double s = s0 - 0.5; s <= s0 + 0.5; s += 1e-3) {
                const double d = (c.point(s) - x).norm();
                if (d < dmin) {
                    dmin = d;
                    best = s;
                }
            }
            double a = best - 1e-3, b = best + 1e-3;
            const double g = (std::sqrt(5.0) - 1) / 2;
            for (int k = 0; k < 60; ++k) {
                const double m1 = b - g * (b - a), m2 = a + g * (b - a);
                if ((c.point(m1) - x).norm() < (c.point(m2) - x).norm())
                    b = m2;
                else
                    a = m1;
            }
            const double dist = (c.point(0.5 * (a + b)) - x).norm();
            EXPECT_NEAR(dist, r, r * r * kmax + 1e-9) << s0 << " " << r;
        }
    }
}

TEST(ShiftedPoint, WarnsAtTubularRadius) {
    const auto c = arc();
    const double r0 = tubular_radius(c);
    EXPECT_NEAR(r0, 0.5, 1e-6);
    EXPECT_TRUE(shifted_curve_point(c, 0.0, r0, 0.0).warning.has_value());
    EXPECT_FALSE(shifted_curve_point(c, 0.0, 0.5 * r0, 0.0).warning.has_value());
    EXPECT_TRUE(std::isinf(tubular_radius(reparametrize_arclength(spec(StraightLine{}), 0.1))));
}

TEST(Frames, ContinuousAcrossCurvatureSignChange) {
    // the arc joint reverses its turning direction at |s| = R bend / 2
    const auto c = arc(pi / 3, 1.0);
    const double s = pi / 6;
    const Frame a = c.frame(s - 1e-6), b = c.frame(s + 1e-6);
    EXPECT_LT((a.normal - b.normal).norm(), 1e-4);
    EXPECT_LT((a.binormal - b.binormal).norm(), 1e-4);
}

TEST(Export, CsvHasHeaderAndRows) {
    const auto c = arc();
    std::ostringstream out;
    c.write_csv(out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "s,x,y,z,gamma");
    std::size_t rows = 0;
    while (std::getline(in, line))
        ++rows;
    EXPECT_EQ(rows, c.grid().size());
}
