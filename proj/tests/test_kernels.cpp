#include <gtest/gtest.h>

#include <leakywire/kernels.hpp>

#include <cmath>
#include <complex>
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

// G(chord) - G(arc) evaluated naively in long double.
long double naive_b(long double chord, long double u, long double kappa) {
    const long double four_pi = 4 * 3.141592653589793238462643383279502884L;
    return std::exp(-kappa * chord) / (four_pi * chord) - std::exp(-kappa * u) / (four_pi * u);
}

} // namespace

TEST(Green, ValuesAndSingularity) {
    EXPECT_NEAR(green3d(1.0, 1.0), std::exp(-1.0) / (4 * pi), 1e-16);
    EXPECT_NEAR(green3d(2.0, 0.5), std::exp(-1.0) / (2 * pi), 1e-16);
    EXPECT_THROW(green3d(1.0, 0.0), contract_error);
    double prev = green3d(1.0, 1e-3);
    for (double d = 2e-3; d < 20; d *= 1.7) {
        const double g = green3d(1.0, d);
        EXPECT_GT(g, 0.0);
        EXPECT_LT(g, prev);
        prev = g;
    }
    EXPECT_EQ(green3d(KernelParams{1.5}, Vec3(0, 3, 4)), green3d(1.5, 5.0));
}

TEST(Convolution, QuadratureMatchesClosedFormOnGrid) {
    for (double kappa : {0.5, 1.0, 2.0})
        for (double d : {0.0, 0.5, 1.0, 3.0}) {
            const KernelParams p{kappa};
            const Vec3 y(0.1, -0.2, 0.3), z = y + d * Vec3(2, 1, -2) / 3;
            const double exact = green_convolution(p, y, z);
            const double quad = green_convolution(p, y, z, ConvolutionMode::quadrature, 1e-10);
            EXPECT_LT(std::abs(quad - exact) / exact, 1e-6) << kappa << " " << d;
        }
}

TEST(Convolution, CoincidentPointsHaveElementaryValue) {
    // int |G|^2 = int_0^inf exp(-2 kappa r) / (4 pi) dr
    for (double kappa : {0.3, 1.0, 4.0}) {
        const Vec3 y(1, 2, 3);
        EXPECT_NEAR(green_convolution(KernelParams{kappa}, y, y), 1 / (8 * pi * kappa), 1e-15);
        EXPECT_NEAR(green_convolution(KernelParams{kappa}, y, y, ConvolutionMode::quadrature),
                    1 / (8 * pi * kappa), 1e-9 / kappa);
    }
}

TEST(Convolution, SymmetricAndDecaying) {
    const KernelParams p{1.3};
    const Vec3 y(0, 0, 0), z(0.4, 1.1, -0.7);
    EXPECT_EQ(green_convolution(p, y, z), green_convolution(p, z, y));
    EXPECT_NEAR(green_convolution(p, y, z, ConvolutionMode::quadrature),
                green_convolution(p, z, y, ConvolutionMode::quadrature), 1e-12);
    EXPECT_GT(green_convolution(p, y, z), green_convolution(p, y, 2 * z));
    EXPECT_THROW(green_convolution(KernelParams{-1.0}, y, z), config_error);
}

TEST(BKernel, VanishesOnStraightLine) {
    const auto line = reparametrize_arclength(spec(StraightLine{}), 0.1);
    const KernelParams p{1.0};
    for (double s : {-3.0, 0.0, 0.2})
        for (double t : {-1.0, 0.0, 5.0})
            EXPECT_EQ(b_kernel(line, p, s, t), 0.0);
}

TEST(BKernel, VanishesOnSameHalfLineOnly) {
    const auto c = reparametrize_arclength(spec(CircularArcJoint{pi / 3, 1.0}), 0.05);
    const KernelParams p{1.0};
    const auto [lo, hi] = *c.straight_range();
    EXPECT_EQ(b_kernel(c, p, lo - 1, lo - 3), 0.0);
    EXPECT_EQ(b_kernel(c, p, hi + 1, hi + 0.5), 0.0);
    EXPECT_GT(b_kernel(c, p, lo - 1, hi + 1), 0.0);
    EXPECT_GT(b_kernel(c, p, 0.0, 0.5), 0.0);
}

TEST(BKernel, NonnegativeAndSymmetricOnBentCurves) {
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> s(-4, 4);
    const KernelParams p{0.8, 1e-3};
    for (const auto& c : {reparametrize_arclength(spec(CircularArcJoint{pi / 2, 0.7}), 0.05),
                          reparametrize_arclength(spec(PlanarBump{1.5, 0.8}), 0.05)}) {
        for (int k = 0; k < 200; ++k) {
            const double a = s(gen), b = s(gen);
            const double v = b_kernel(c, p, a, b);
            EXPECT_GE(v, 0.0);
            EXPECT_NEAR(v, b_kernel(c, p, b, a), 1e-15 * std::max(1.0, v));
        }
    }
}

TEST(BKernel, MatchesExtendedPrecisionOnCircle) {
    // points on a circle of radius R with arc separation u; curvature 1/R
    for (double R : {0.5, 1.0, 3.0})
        for (double kappa : {0.5, 2.0})
            for (double u : {1.0, 0.3, 0.05, 0.01, 0.002, 5e-4, 1e-4}) {
                const long double chord = 2 * R * std::sin(static_cast<long double>(u) / (2 * R));
                const long double expect = naive_b(chord, u, kappa);
                const Vec3 a(R, 0, 0), b(R * std::cos(u / R), R * std::sin(u / R), 0);
                const double got = b_kernel_points(a, b, u, 1 / (R * R), kappa, 1e-3);
                // below the cutoff the truncated Taylor form is accurate to O(u^2 / R^2)
                const double tol = u <= 1e-3 ? 1e-6 : 1e-8;
                EXPECT_LT(std::abs(got - static_cast<double>(expect)) / static_cast<double>(expect), tol)
                    << R << " " << kappa << " " << u;
            }
}

TEST(BKernel, TaylorSeamIsContinuous) {
    const double R = 0.8, kappa = 1.0, cut = 1e-3;
    auto at = [&](double u) {
        const Vec3 a(R, 0, 0), b(R * std::cos(u / R), R * std::sin(u / R), 0);
        return b_kernel_points(a, b, u, 1 / (R * R), kappa, cut);
    };
    const double below = at(cut), above = at(cut * (1 + 1e-12));
    EXPECT_LT(std::abs(below - above) / above, 1e-6);
}

TEST(BKernel, KappaDerivativeMatchesFiniteDifference) {
    const double R = 1.2;
    for (double u : {0.7, 0.05, 5e-4})
        for (double kappa : {0.6, 1.7}) {
            const Vec3 a(R, 0, 0), b(R * std::cos(u / R), R * std::sin(u / R), 0);
            const double e = 1e-5 * kappa;
            const double fd = (b_kernel_points(a, b, u, 1 / (R * R), kappa + e, 1e-3) -
                               b_kernel_points(a, b, u, 1 / (R * R), kappa - e, 1e-3)) /
                              (2 * e);
            const double d = b_kernel_dkappa_points(a, b, u, 1 / (R * R), kappa, 1e-3);
            EXPECT_NEAR(d, fd, 1e-6 * std::abs(fd) + 1e-14) << u << " " << kappa;
        }
}

TEST(Params, Validation) {
    EXPECT_NO_THROW(KernelParams{}.validate());
    EXPECT_THROW((KernelParams{0.0}).validate(), config_error);
    EXPECT_THROW((KernelParams{1.0, -1.0}).validate(), config_error);
    EXPECT_THROW((KernelParams{1.0, 0.1}).validate(0.05), config_error);
    EXPECT_NO_THROW((KernelParams{1.0, 1e-3}).validate(0.05));
    EXPECT_EQ(default_diagonal_cutoff(0.5), 1e-3);
    EXPECT_EQ(default_diagonal_cutoff(1e-3), 5e-4);
}

TEST(TSymbol, ValuesAndMonotonicity) {
    EXPECT_NEAR(t_symbol(1.0, 0.0), (ln_two + psi_one) / (2 * pi), 1e-16);
    // vanishes at p = 0 exactly when kappa = 2 exp(psi(1))
    EXPECT_NEAR(t_symbol(2 * std::exp(psi_one), 0.0), 0.0, 1e-16);
    double prev = t_symbol(1.0, 0.0);
    for (double p = 0.1; p < 100; p *= 1.5) {
        EXPECT_LT(t_symbol(1.0, p), prev);
        EXPECT_EQ(t_symbol(1.0, p), t_symbol(1.0, -p));
        prev = t_symbol(1.0, p);
    }
    for (double kappa : {0.3, 1.0, 5.0})
        for (double p : {0.0, 0.7, 4.0}) {
            const double e = 1e-6 * kappa;
            EXPECT_NEAR(t_symbol_dkappa(kappa, p), (t_symbol(kappa + e, p) - t_symbol(kappa - e, p)) / (2 * e), 1e-8);
        }
}

TEST(TSymbol, FrequenciesInFftOrder) {
    const auto p = grid_frequencies(8, 2.0);
    const std::vector<double> want{0, 1, 2, 3, -4, -3, -2, -1};
    for (std::size_t k = 0; k < 8; ++k)
        EXPECT_DOUBLE_EQ(p[k], pi * want[k] / 2.0);
    EXPECT_TRUE(is_power_of_two(1024));
    EXPECT_FALSE(is_power_of_two(1000));
    EXPECT_FALSE(is_power_of_two(0));
}

TEST(ApplyT, MatchesDirectDft) {
    const std::size_t n = 64;
    const double L = 8;
    const double h = 2 * L / n;
    Eigen::VectorXd f(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = -L + h * static_cast<double>(i);
        f(static_cast<Eigen::Index>(i)) = std::exp(-s * s) * (1 + 0.3 * s);
    }
    const KernelParams p{0.9};
    const auto got = apply_t(p, f, L);
    EXPECT_FALSE(got.wraparound);
    // O(n^2) transform with frequencies pi k / L
    for (std::size_t j = 0; j < n; ++j) {
        std::complex<double> acc = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const long kk = k < n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
            std::complex<double> fk = 0;
            for (std::size_t i = 0; i < n; ++i)
                fk += f(static_cast<Eigen::Index>(i)) *
                      std::polar(1.0, -2 * pi * static_cast<double>(k * i) / static_cast<double>(n));
            acc += fk * t_symbol(p.kappa, pi * static_cast<double>(kk) / L) *
                   std::polar(1.0, 2 * pi * static_cast<double>(k * j) / static_cast<double>(n));
        }
        EXPECT_NEAR(got.value(static_cast<Eigen::Index>(j)), acc.real() / static_cast<double>(n), 1e-12);
    }
}

TEST(ApplyT, ConstantIsScaledAndFlagsWraparound) {
    const Eigen::VectorXd f = Eigen::VectorXd::Constant(32, 2.0);
    const auto out = apply_t(KernelParams{1.4}, f, 5.0);
    EXPECT_TRUE(out.wraparound);
    EXPECT_NEAR(out.boundary_magnitude, 1.0, 0.0);
    for (Eigen::Index i = 0; i < f.size(); ++i)
        EXPECT_NEAR(out.value(i), 2.0 * t_symbol(1.4, 0.0), 1e-14);
    EXPECT_THROW(apply_t(KernelParams{}, Eigen::VectorXd::Zero(30), 5.0), config_error);
    EXPECT_THROW(apply_t(KernelParams{}, Eigen::VectorXd::Zero(32), 0.0), config_error);
}

TEST(ApplyT, SelfAdjoint) {
    std::mt19937 gen(3);
    std::normal_distribution<double> g;
    Eigen::VectorXd f(128), v(128);
    for (Eigen::Index i = 0; i < 128; ++i) {
        f(i) = g(gen);
        v(i) = g(gen);
    }
    const KernelParams p{0.7};
    EXPECT_NEAR(v.dot(apply_t(p, f, 10).value), f.dot(apply_t(p, v, 10).value), 1e-11);
}

TEST(Export, SymbolCsv) {
    std::ostringstream out;
    write_symbol_csv(out, 1.0, {0.0, 1.0});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "p,t");
    std::getline(in, line);
    EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), t_symbol(1.0, 0.0));
}
