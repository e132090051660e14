#ifndef LEAKYWIRE_LINALG_HPP
#define LEAKYWIRE_LINALG_HPP

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <string>
#include <vector>

#include "error.hpp"

namespace leakywire {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues in the order documented by the producing function, with the
/// matching eigenvectors as columns.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

namespace detail {

inline void check_lapack(lapack_int info, const char* routine) {
    if (info != 0)
        throw numeric_error(std::string(routine) + " failed with info = " + std::to_string(info));
}

inline void check_square(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw contract_error("symmetric eigensolver needs a non-empty square matrix");
}

} // namespace detail

/// The k algebraically largest eigenpairs of a symmetric matrix, descending.
/// Only the upper triangle is read.
inline SymmetricEigen top_symmetric_eigen(const Matrix& a, int k) {
    detail::check_square(a);
    const lapack_int n = static_cast<lapack_int>(a.rows());
    if (k < 1 || k > n)
        throw contract_error("requested eigenpair count outside [1, N]");
    Matrix work = a;
    Vector w(n);
    Matrix z(n, k);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
    lapack_int found = 0;
    const lapack_int info =
        LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, work.data(), n, 0.0, 0.0, n - k + 1, n, 0.0,
                       &found, w.data(), z.data(), n, support.data());
    detail::check_lapack(info, "dsyevr");
    if (found != k)
        throw numeric_error("dsyevr returned " + std::to_string(found) + " of " + std::to_string(k) + " eigenpairs");

    SymmetricEigen out{Vector(k), Matrix(n, k)};
    for (int i = 0; i < k; ++i) {
        out.values(i) = w(k - 1 - i);
        out.vectors.col(i) = z.col(k - 1 - i);
    }
    return out;
}

/// All eigenvalues, ascending.
inline Vector symmetric_eigenvalues(const Matrix& a) {
    detail::check_square(a);
    const lapack_int n = static_cast<lapack_int>(a.rows());
    Matrix work = a;
    Vector w(n);
    detail::check_lapack(LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', n, work.data(), n, w.data()), "dsyevd");
    return w;
}

/// Full decomposition, eigenvalues ascending.
inline SymmetricEigen symmetric_eigen(const Matrix& a) {
    detail::check_square(a);
    const lapack_int n = static_cast<lapack_int>(a.rows());
    SymmetricEigen out{Vector(n), a};
    detail::check_lapack(
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, out.vectors.data(), n, out.values.data()), "dsyevd");
    return out;
}

/// Largest singular value; the spectral norm.
inline double spectral_norm(const Matrix& a) {
    if (a.size() == 0)
        return 0.0;
    Eigen::BDCSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

/// Sum of singular values.
inline double nuclear_norm(const Matrix& a) {
    if (a.size() == 0)
        return 0.0;
    Eigen::BDCSVD<Matrix> svd(a);
    return svd.singularValues().sum();
}

} // namespace leakywire

#endif
