#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include "gridseg/common.hpp"

namespace gridseg {

/// Full eigensystem of a real general matrix: values, right eigenvectors
/// (A v = lambda v) and transposed-left eigenvectors (y^T A = lambda y^T),
/// consistently paired from one Schur factorization.
struct EigenSystem {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd right;
    Eigen::MatrixXcd left_t;
};

inline EigenSystem dense_eigensystem(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd work = a;  // dgeev overwrites
    Eigen::VectorXd wr(n), wi(n);
    Eigen::MatrixXd vl(n, n), vr(n, n);
    const int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'V', 'V', n, work.data(), n, wr.data(),
                                   wi.data(), vl.data(), n, vr.data(), n);
    if (info != 0)
        throw DomainError("eigensolver did not converge (dgeev info=" + std::to_string(info) +
                          ")");

    EigenSystem es;
    es.values.resize(n);
    es.right.resize(n, n);
    es.left_t.resize(n, n);
    for (int j = 0; j < n; ++j) {
        es.values(j) = Complex(wr(j), wi(j));
        if (wi(j) > 0.0) {
            // columns j, j+1 hold Re/Im of the eigenvector for the pair
            es.right.col(j) = vr.col(j).cast<Complex>() + Complex(0, 1) * vr.col(j + 1);
            es.right.col(j + 1) = es.right.col(j).conjugate();
            // dgeev's left vectors satisfy u^H A = lambda u^H; the
            // transposed convention y^T A = lambda y^T needs y = conj(u)
            es.left_t.col(j) = vl.col(j).cast<Complex>() - Complex(0, 1) * vl.col(j + 1);
            es.left_t.col(j + 1) = es.left_t.col(j).conjugate();
            ++j;
        } else if (wi(j) == 0.0) {
            es.right.col(j) = vr.col(j).cast<Complex>();
            es.left_t.col(j) = vl.col(j).cast<Complex>();
        }
    }
    return es;
}

/// Reciprocal 1-norm condition estimate of a (used for diagnostics when an
/// eigen residual check fails).
inline double rcond_estimate(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd lu = a;
    std::vector<lapack_int> ipiv(n);
    const double anorm = LAPACKE_dlange(LAPACK_COL_MAJOR, '1', n, n, lu.data(), n);
    if (LAPACKE_dgetrf(LAPACK_COL_MAJOR, n, n, lu.data(), n, ipiv.data()) != 0) return 0.0;
    double rcond = 0.0;
    LAPACKE_dgecon(LAPACK_COL_MAJOR, '1', n, lu.data(), n, anorm, &rcond);
    return rcond;
}

}  // namespace gridseg
