#pragma once

#include <Eigen/Dense>
#include <complex>
#include <lapacke.h>
#include <vector>

#include "core.hpp"

namespace boltzgap {

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

struct SymEig {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns, orthonormal
};

inline SymEig sym_eig(const Eigen::MatrixXd& S, bool vectors = true) {
    SymEig r;
    r.vectors = S;
    const lapack_int n = static_cast<lapack_int>(S.rows());
    r.values.resize(n);
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'U', n, r.vectors.data(), n,
                                     r.values.data());
    if (info != 0) throw NumericalError("dsyevd failed with info " + std::to_string(info));
    if (!vectors) r.vectors.resize(0, 0);
    return r;
}

struct GenEig {
    CVector values;
    CMatrix right, left;  // empty unless requested; left: A^H u = conj(lambda) u
};

inline GenEig gen_eig(const Eigen::MatrixXd& A, bool right_vectors = false, bool left_vectors = false) {
    Eigen::MatrixXd a = A;
    const lapack_int n = static_cast<lapack_int>(A.rows());
    std::vector<double> wr(n), wi(n);
    Eigen::MatrixXd vr(right_vectors ? n : 1, right_vectors ? n : 1);
    Eigen::MatrixXd vl(left_vectors ? n : 1, left_vectors ? n : 1);
    lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, left_vectors ? 'V' : 'N', right_vectors ? 'V' : 'N', n,
                                    a.data(), n, wr.data(), wi.data(), vl.data(), left_vectors ? n : 1, vr.data(),
                                    right_vectors ? n : 1);
    if (info != 0) throw NumericalError("dgeev failed with info " + std::to_string(info));
    GenEig r;
    r.values.resize(n);
    for (lapack_int i = 0; i < n; ++i) r.values[i] = {wr[i], wi[i]};
    // LAPACK packs conjugate pairs as (re, im) columns
    auto unpack = [&](const Eigen::MatrixXd& v, CMatrix& out) {
        out.resize(n, n);
        for (lapack_int j = 0; j < n; ++j) {
            if (wi[j] == 0 || j + 1 >= n) {
                out.col(j) = v.col(j).cast<std::complex<double>>();
            } else {
                for (lapack_int i = 0; i < n; ++i) {
                    out(i, j) = {v(i, j), v(i, j + 1)};
                    out(i, j + 1) = {v(i, j), -v(i, j + 1)};
                }
                ++j;
            }
        }
    };
    if (right_vectors) unpack(vr, r.right);
    if (left_vectors) unpack(vl, r.left);
    return r;
}

// Principal angles (radians, descending) between the column spans of A and B.
inline Eigen::VectorXd principal_angles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
    Eigen::MatrixXd Qa = qa.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    Eigen::MatrixXd Qb = qb.householderQ() * Eigen::MatrixXd::Identity(B.rows(), B.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Qa.transpose() * Qb);
    Eigen::VectorXd s = svd.singularValues();
    Eigen::VectorXd ang(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) ang[i] = std::acos(std::min(1.0, s[s.size() - 1 - i]));
    return ang;
}

}  // namespace boltzgap
