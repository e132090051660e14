#include <gtest/gtest.h>

#include <leakywire/birman_schwinger.hpp>

#include <algorithm>
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

const ArcLengthCurve& arc() {
    static const ArcLengthCurve c = reparametrize_arclength(spec(CircularArcJoint{pi / 3, 1.0}), 0.02);
    return c;
}

const ArcLengthCurve& line() {
    static const ArcLengthCurve c = reparametrize_arclength(spec(StraightLine{}), 0.1);
    return c;
}

} // namespace

TEST(Discretization, GridAndBlocks) {
    const auto d = make_discretization(arc(), 6.0, 256);
    EXPECT_DOUBLE_EQ(d.h, 12.0 / 256);
    EXPECT_EQ(d.s.front(), -6.0);
    EXPECT_NEAR(d.s.back(), 6.0 - d.h, 1e-14);
    std::vector<Eigen::Index> all;
    for (auto b : all_blocks) {
        const auto& idx = d.block(b);
        EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
        all.insert(all.end(), idx.begin(), idx.end());
        EXPECT_DOUBLE_EQ(d.weight_sum(b), d.h * static_cast<double>(idx.size()));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i)
        EXPECT_EQ(all[i], static_cast<Eigen::Index>(i));
    EXPECT_EQ(all.size(), 256u);
    for (auto i : d.block(Block::minus))
        EXPECT_LT(d.s[static_cast<std::size_t>(i)], d.s_minus);
    for (auto i : d.block(Block::M)) {
        EXPECT_GE(d.s[static_cast<std::size_t>(i)], d.s_minus);
        EXPECT_LE(d.s[static_cast<std::size_t>(i)], d.s_plus);
    }
    // Sigma blocks split at the axis junctions
    for (auto i : d.sigma_block(Block::plus))
        EXPECT_GT(d.s[static_cast<std::size_t>(i)], d.x_plus);
}

TEST(Discretization, StraightLineSplitsAtOrigin) {
    const auto d = make_discretization(line(), 4.0, 64);
    EXPECT_TRUE(d.straight);
    EXPECT_TRUE(d.block(Block::M).empty());
    EXPECT_EQ(d.block(Block::minus).size(), 32u);
    EXPECT_EQ(d.s[static_cast<std::size_t>(d.block(Block::plus).front())], 0.0);
}

TEST(Discretization, Rejections) {
    EXPECT_THROW(make_discretization(line(), 4.0, 100), config_error);
    EXPECT_THROW(make_discretization(line(), -1.0, 64), config_error);
    EXPECT_THROW(make_discretization(arc(), 1.0, 64), config_error);
}

TEST(TMatrix, EigenvaluesAreSymbolSamples) {
    const auto d = make_discretization(line(), 5.0, 64);
    const KernelParams p{0.8};
    const Matrix T = assemble_T(d, p);
    EXPECT_LT((T - T.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    auto ev = symmetric_eigenvalues(T);
    std::vector<double> got(ev.data(), ev.data() + ev.size());
    std::vector<double> want;
    for (double q : grid_frequencies(64, 5.0))
        want.push_back(t_symbol(0.8, q));
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    for (std::size_t i = 0; i < want.size(); ++i)
        EXPECT_NEAR(got[i], want[i], 1e-13);
}

TEST(TMatrix, ColumnsMatchSpectralApplication) {
    const auto d = make_discretization(line(), 3.0, 32);
    const KernelParams p{1.1};
    const Matrix T = assemble_T(d, p);
    for (Eigen::Index j : {0, 7, 31}) {
        const auto col = apply_t(p, Eigen::VectorXd::Unit(32, j), 3.0).value;
        EXPECT_LT((T.col(j) - col).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(BMatrix, ZeroOnStraightLine) {
    const auto d = make_discretization(line(), 8.0, 128);
    EXPECT_EQ(assemble_B(d, KernelParams{1.0}).cwiseAbs().maxCoeff(), 0.0);
    const auto q = assemble_Q(d, KernelParams{1.0});
    EXPECT_EQ((q.entries - q.t_part).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BMatrix, EntriesAreWeightedKernel) {
    const auto d = make_discretization(arc(), 6.0, 256);
    const KernelParams p{1.3, default_diagonal_cutoff(d.h)};
    const Matrix B = assemble_B(d, p);
    EXPECT_EQ((B - B.transpose()).cwiseAbs().maxCoeff(), 0.0);
    std::mt19937 gen(11);
    std::uniform_int_distribution<int> pick(0, 255);
    for (int k = 0; k < 300; ++k) {
        const int i = pick(gen), j = pick(gen);
        const double want = i == j ? 0.0 : d.h * b_kernel(arc(), p, d.s[std::size_t(i)], d.s[std::size_t(j)]);
        EXPECT_NEAR(B(i, j), want, 1e-14 * std::max(1.0, std::abs(want)));
        EXPECT_GE(B(i, j), 0.0);
    }
    // symmetrized matrix has zero trace
    EXPECT_EQ(symmetrized(B, d).trace(), 0.0);
}

TEST(QMatrix, KappaDerivativeMatchesFiniteDifference) {
    const auto d = make_discretization(arc(), 6.0, 128);
    const double kappa = 1.2, e = 1e-5, cut = default_diagonal_cutoff(d.h);
    const Matrix fd = (assemble_Q(d, KernelParams{kappa + e, cut}).entries -
                       assemble_Q(d, KernelParams{kappa - e, cut}).entries) /
                      (2 * e);
    const Matrix an = assemble_Q_dkappa(d, KernelParams{kappa, cut});
    EXPECT_LT((fd - an).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(QMatrix, TopEigenpairsAreNormalizedAndOrdered) {
    const auto d = make_discretization(arc(), 8.0, 256);
    const auto q = assemble_Q(d, KernelParams{0.5, default_diagonal_cutoff(d.h)});
    const auto pairs = top_eigenpairs(q, d, 3);
    ASSERT_EQ(pairs.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(d.h * pairs[k].phi.squaredNorm(), 1.0, 1e-12);
        EXPECT_LT((q.entries * pairs[k].phi - pairs[k].mu * pairs[k].phi).norm(), 1e-8);
        if (k > 0) {
            EXPECT_GE(pairs[k - 1].mu, pairs[k].mu);
        }
    }
    const auto all = symmetric_eigenvalues(q.entries);
    EXPECT_NEAR(pairs[0].mu, all.maxCoeff(), 1e-12);
    EXPECT_THROW(top_eigenpairs(q, d, 0), contract_error);
}

TEST(Resolvent, InverseAndBlocks) {
    const auto d = make_discretization(arc(), 6.0, 128);
    const auto q = assemble_Q(d, KernelParams{2.0, default_diagonal_cutoff(d.h)});
    const double alpha = 0.3;
    const Resolvent r(alpha, q.entries);
    const Matrix a = alpha * Matrix::Identity(128, 128) - q.entries;
    EXPECT_LT((r.inverse() * a - Matrix::Identity(128, 128)).cwiseAbs().maxCoeff(), 1e-10);
    const auto ev = symmetric_eigenvalues(q.entries);
    EXPECT_NEAR(r.sigma_min(), (alpha - ev.array()).abs().minCoeff(), 1e-12);
    EXPECT_NEAR(r.smallest_eigenvalue(), alpha - ev.maxCoeff(), 1e-12);
    const Matrix blk = resolvent_block(alpha, q, d, Block::M, Block::plus);
    EXPECT_EQ(blk.rows(), static_cast<Eigen::Index>(d.block(Block::M).size()));
    EXPECT_EQ(blk.cols(), static_cast<Eigen::Index>(d.block(Block::plus).size()));
    const Matrix e = embed_block(blk, d, Block::M, Block::plus);
    EXPECT_EQ(e(d.block(Block::M), d.block(Block::plus)), blk);
    EXPECT_NEAR(e.cwiseAbs().sum(), blk.cwiseAbs().sum(), 1e-12);
}

TEST(Resolvent, SingularPencilThrows) {
    const auto d = make_discretization(arc(), 6.0, 64);
    const auto q = assemble_Q(d, KernelParams{1.0, default_diagonal_cutoff(d.h)});
    const double mu = symmetric_eigenvalues(q.entries).maxCoeff();
    try {
        Resolvent r(mu, q.entries);
        FAIL() << "expected singular_error";
    } catch (const singular_error& e) {
        EXPECT_LT(e.sigma_min(), singular_floor);
    }
}

TEST(LowerBound, StraightLineMatchesSymbolOracle) {
    const auto d = make_discretization(line(), 40.0, 1024);
    const std::vector<double> kappas{std::exp(2.0), std::exp(3.0), std::exp(4.0)};
    const double alpha = 0.0;
    const auto r = lower_bound_check(d, alpha, kappas, 1e-3);
    ASSERT_EQ(r.kappas.size(), 3u);
    const auto p = grid_frequencies(d.N, d.L);
    std::vector<double> oracle;
    for (double k : kappas) {
        double m = 1e300;
        for (double q : p)
            m = std::min(m, std::abs(alpha - t_symbol(k, q)));
        oracle.push_back(m);
    }
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_NEAR(r.sigma_min[i], oracle[i], 1e-12);
    EXPECT_TRUE(std::is_sorted(r.sigma_min.begin(), r.sigma_min.end()));
    EXPECT_LT(std::abs(r.fitted_c - 1 / (2 * pi)) * 2 * pi, 0.1);
    EXPECT_TRUE(r.pass);
    EXPECT_THROW(lower_bound_check(d, alpha, {3.0, 2.0}, 1e-3), config_error);
}

TEST(LowerBound, SingularKappaIsExcluded) {
    // t(0) = alpha exactly at kappa = kappa_alpha; a 1 x 1 "matrix" makes it exact
    const double alpha = 0.1;
    const double ka = 2 * std::exp(psi_one - 2 * pi * alpha);
    const auto r = lower_bound_check(alpha, {ka, 5.0, 20.0}, [](double kappa) {
        Matrix m(1, 1);
        m(0, 0) = t_symbol(kappa, 0.0);
        return m;
    });
    EXPECT_EQ(r.excluded, std::vector<double>{ka});
    EXPECT_EQ(r.notices.size(), 1u);
    EXPECT_EQ(r.kappas.size(), 2u);
}

TEST(MatrixIo, BinaryRoundTripAndCsv) {
    Matrix m(3, 3);
    m << 1, 2, 3, 4, 5, 6, 7, 8, 9.5;
    std::stringstream buf;
    write_matrix_binary(buf, m, 1.25, 48.0);
    EXPECT_EQ(buf.str().size(), 8u + 8 + 8 + 9 * 8);
    const auto f = read_matrix_binary(buf);
    EXPECT_EQ(f.m, m);
    EXPECT_EQ(f.kappa, 1.25);
    EXPECT_EQ(f.L, 48.0);
    std::stringstream bad(std::string(10, '\0'));
    EXPECT_THROW(read_matrix_binary(bad), config_error);
    std::stringstream again;
    write_matrix_binary(again, m, 1.0, 1.0);
    std::stringstream cut(again.str().substr(0, 40));
    EXPECT_THROW(read_matrix_binary(cut), config_error);
    EXPECT_THROW(write_matrix_binary(again, Matrix::Zero(2, 3), 1, 1), contract_error);
    std::ostringstream csv;
    write_matrix_csv(csv, m);
    EXPECT_EQ(csv.str().substr(0, 6), "1,2,3\n");
}
