#pragma once

#include "cosie/error.hpp"
#include "cosie/graph.hpp"

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace cosie {

/// Leading eigenpairs of a symmetric matrix, ordered by decreasing |value|.
/// Column j of `vectors` is a unit eigenvector for values[j]; in every column
/// the entry of largest magnitude is positive (first such row on ties).
struct EigenPairs {
    Vector values;
    Matrix vectors;
};

/// Flips column signs so that each column's largest-magnitude entry is
/// positive. Ties go to the lowest row index.
inline void normalize_signs(Matrix& vectors) {
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
            const double a = std::abs(vectors(i, j));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (vectors.rows() > 0 && vectors(best, j) < 0.0) vectors.col(j) *= -1.0;
    }
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline void require_symmetric(const Matrix& s, const char* what) {
    require(s.rows() == s.cols(), ErrorCode::dimension_mismatch,
            std::string(what) + " must be square");
    const double tol = 1e-12 * std::max(1.0, max_abs(s));
    for (Eigen::Index j = 0; j < s.cols(); ++j)
        for (Eigen::Index i = j + 1; i < s.rows(); ++i)
            if (std::abs(s(i, j) - s(j, i)) > tol)
                throw ValidationError(std::string(what) + " is not symmetric",
                                      std::make_pair(static_cast<std::size_t>(i),
                                                     static_cast<std::size_t>(j)));
}

namespace detail {

/// Householder tridiagonalization Q T Q^T of a symmetric matrix (lower part).
struct Tridiagonal {
    Matrix reflectors;  // dsytrd output: Householder vectors below the subdiagonal
    std::vector<double> diag, offdiag, tau;
};

inline Tridiagonal tridiagonalize(const Matrix& s) {
    const auto n = static_cast<lapack_int>(s.rows());
    Tridiagonal t;
    t.reflectors = s;
    t.diag.resize(static_cast<std::size_t>(n));
    t.offdiag.resize(static_cast<std::size_t>(std::max<lapack_int>(n, 1)));
    t.tau.resize(static_cast<std::size_t>(std::max<lapack_int>(n - 1, 1)));
    const lapack_int info = LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', n, t.reflectors.data(), n,
                                           t.diag.data(), t.offdiag.data(), t.tau.data());
    require(info == 0, ErrorCode::invalid_argument, "dsytrd failed");
    return t;
}

/// All eigenvalues in ascending order (values only, O(n^2) after reduction).
inline std::vector<double> tridiagonal_eigenvalues(const Tridiagonal& t) {
    std::vector<double> d = t.diag;
    std::vector<double> e = t.offdiag;
    const auto n = static_cast<lapack_int>(d.size());
    const lapack_int info = LAPACKE_dsterf(n, d.data(), e.data());
    require(info == 0, ErrorCode::invalid_argument, "dsterf failed to converge");
    return d;
}

/// Eigenvectors of the original matrix for ascending indices [lo, hi) (0-based).
inline void tridiagonal_vectors(const Tridiagonal& t, lapack_int lo, lapack_int hi,
                                std::vector<double>& values, Matrix& vectors) {
    const auto n = static_cast<lapack_int>(t.diag.size());
    const lapack_int k = hi - lo;
    values.assign(static_cast<std::size_t>(std::max<lapack_int>(k, 0)), 0.0);
    vectors.resize(n, k);
    if (k <= 0) return;
    std::vector<double> d = t.diag;
    std::vector<double> e = t.offdiag;
    e.resize(static_cast<std::size_t>(n));
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
    lapack_int found = 0;
    lapack_logical tryrac = 1;
    lapack_int info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'I', n, d.data(), e.data(), 0.0, 0.0,
                                     lo + 1, hi, &found, w.data(), vectors.data(), n, k,
                                     support.data(), &tryrac);
    require(info == 0 && found == k, ErrorCode::invalid_argument, "dstemr failed");
    info = LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, k, t.reflectors.data(), n,
                          t.tau.data(), vectors.data(), n);
    require(info == 0, ErrorCode::invalid_argument, "dormtr failed");
    std::copy(w.begin(), w.begin() + k, values.begin());
}

} // namespace detail

/// All eigenvalues of a symmetric matrix, sorted by decreasing magnitude.
inline Vector eigenvalues_by_magnitude(const Matrix& s) {
    require_symmetric(s, "matrix");
    if (s.rows() == 0) return Vector();
    auto ascending = detail::tridiagonal_eigenvalues(detail::tridiagonalize(s));
    std::stable_sort(ascending.begin(), ascending.end(), [](double a, double b) {
        return std::abs(a) > std::abs(b) || (std::abs(a) == std::abs(b) && a > b);
    });
    return Eigen::Map<Vector>(ascending.data(), static_cast<Eigen::Index>(ascending.size()));
}

/// Full eigendecomposition (ascending values) through LAPACK's
/// divide-and-conquer driver.
inline EigenPairs full_eig(const Matrix& s) {
    require_symmetric(s, "matrix");
    const auto n = static_cast<lapack_int>(s.rows());
    EigenPairs out;
    out.vectors = s;
    out.values.resize(n);
    if (n == 0) return out;
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n, out.values.data());
    require(info == 0, ErrorCode::invalid_argument, "dsyevd failed to converge");
    return out;
}

/// The d eigenpairs of largest magnitude of a symmetric matrix.
///
/// Dense direct solver: one Householder reduction, all eigenvalues from the
/// tridiagonal form, then eigenvectors only for the selected indices (which
/// always form a prefix and a suffix of the ascending spectrum).
inline EigenPairs top_eigs(const Matrix& s, std::size_t d) {
    require_symmetric(s, "matrix");
    const auto n = static_cast<std::size_t>(s.rows());
    require(d >= 1 && d <= n, ErrorCode::invalid_argument,
            "eigenpair count d=" + std::to_string(d) + " must lie in [1, n=" + std::to_string(n) +
                "]");

    if (n <= 2) {
        // tiny problems: dense solver
        auto full = full_eig(s);
        std::vector<Eigen::Index> order(n);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            const double x = full.values(a), y = full.values(b);
            return std::abs(x) > std::abs(y) || (std::abs(x) == std::abs(y) && x > y);
        });
        EigenPairs out;
        out.values.resize(static_cast<Eigen::Index>(d));
        out.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) {
            out.values(static_cast<Eigen::Index>(j)) = full.values(order[j]);
            out.vectors.col(static_cast<Eigen::Index>(j)) = full.vectors.col(order[j]);
        }
        normalize_signs(out.vectors);
        return out;
    }

    const auto tri = detail::tridiagonalize(s);
    const auto ascending = detail::tridiagonal_eigenvalues(tri);

    // Take from whichever end has the larger magnitude; positive wins ties.
    std::size_t lo = 0, hi = n;
    for (std::size_t k = 0; k < d; ++k) {
        if (std::abs(ascending[hi - 1]) >= std::abs(ascending[lo]))
            --hi;
        else
            ++lo;
    }

    std::vector<double> neg_values, pos_values;
    Matrix neg_vectors, pos_vectors;
    detail::tridiagonal_vectors(tri, 0, static_cast<lapack_int>(lo), neg_values, neg_vectors);
    detail::tridiagonal_vectors(tri, static_cast<lapack_int>(hi), static_cast<lapack_int>(n),
                                pos_values, pos_vectors);

    struct Item {
        double value;
        const Matrix* source;
        Eigen::Index column;
    };
    std::vector<Item> items;
    for (std::size_t j = 0; j < neg_values.size(); ++j)
        items.push_back({neg_values[j], &neg_vectors, static_cast<Eigen::Index>(j)});
    for (std::size_t j = 0; j < pos_values.size(); ++j)
        items.push_back({pos_values[j], &pos_vectors, static_cast<Eigen::Index>(j)});
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        return std::abs(a.value) > std::abs(b.value) ||
               (std::abs(a.value) == std::abs(b.value) && a.value > b.value);
    });

    EigenPairs out;
    out.values.resize(static_cast<Eigen::Index>(d));
    out.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
        out.values(static_cast<Eigen::Index>(j)) = items[j].value;
        out.vectors.col(static_cast<Eigen::Index>(j)) = items[j].source->col(items[j].column);
    }
    normalize_signs(out.vectors);
    return out;
}

/// Adjacency spectral embedding: the top-d eigenvectors by |eigenvalue|,
/// optionally scaled column-wise by sqrt(|eigenvalue|).
inline Matrix ase(const Matrix& a, std::size_t d, bool scaled) {
    auto eig = top_eigs(a, d);
    if (scaled) eig.vectors *= eig.values.cwiseAbs().cwiseSqrt().asDiagonal();
    return eig.vectors;
}

inline Matrix ase(const Graph& g, std::size_t d, bool scaled) { return ase(g.entries(), d, scaled); }

/// Leading left singular vectors and singular values of a rectangular matrix.
struct SingularPairs {
    Vector values;
    Matrix vectors;
};

/// Top-d left singular subspace. Wide inputs (cols > rows) go through the
/// eigendecomposition of U U^T; tall ones through a thin SVD.
inline SingularPairs top_left_singular(const Matrix& u, std::size_t d) {
    const auto n = static_cast<std::size_t>(u.rows());
    require(d >= 1 && d <= n, ErrorCode::invalid_argument,
            "singular vector count d=" + std::to_string(d) + " must lie in [1, n=" +
                std::to_string(n) + "]");
    SingularPairs out;
    if (u.cols() > u.rows()) {
        Matrix gram = u * u.transpose();
        gram = 0.5 * (gram + gram.transpose());
        auto eig = top_eigs(gram, d);
        out.values = eig.values.cwiseMax(0.0).cwiseSqrt();
        out.vectors = std::move(eig.vectors);
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(u, Eigen::ComputeThinU);
    const auto available = static_cast<std::size_t>(svd.singularValues().size());
    const auto k = static_cast<Eigen::Index>(std::min(d, available));
    out.values = Vector::Zero(static_cast<Eigen::Index>(d));
    out.values.head(k) = svd.singularValues().head(k);
    out.vectors = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    out.vectors.leftCols(k) = svd.matrixU().leftCols(k);
    if (static_cast<std::size_t>(k) < d) {
        // fewer columns than d: pad with an orthonormal complement
        Eigen::HouseholderQR<Matrix> qr(out.vectors.leftCols(k));
        Matrix q = qr.householderQ();
        out.vectors.rightCols(static_cast<Eigen::Index>(d) - k) =
            q.middleCols(k, static_cast<Eigen::Index>(d) - k);
    }
    normalize_signs(out.vectors);
    return out;
}

/// Log-likelihood of splitting `values` after the first q entries into two
/// Gaussian groups with separate means and one pooled MLE variance.
inline double elbow_profile_loglik(std::span<const double> values, std::size_t q,
                                   double variance_floor) {
    const std::size_t p = values.size();
    auto mean = [&](std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += values[i];
        return s / static_cast<double>(e - b);
    };
    const double mu1 = mean(0, q), mu2 = mean(q, p);
    double ss = 0.0;
    for (std::size_t i = 0; i < q; ++i) ss += (values[i] - mu1) * (values[i] - mu1);
    for (std::size_t i = q; i < p; ++i) ss += (values[i] - mu2) * (values[i] - mu2);
    const double var = std::max(ss / static_cast<double>(p), variance_floor);
    const double pi = 3.14159265358979323846;
    return -0.5 * static_cast<double>(p) * std::log(2.0 * pi * var) - 0.5 * ss / var;
}

/// Automatic scree-plot elbow. Returns the split q in [1, len-1] maximizing
/// the two-group profile likelihood; ties resolve to the smallest q.
///
/// The variance floor is 1e-12 relative to the mean square of the values so
/// the choice is invariant to rescaling the spectrum.
inline std::size_t elbow_dimension(std::span<const double> values,
                                   std::optional<std::size_t> max_candidates = std::nullopt) {
    require(values.size() >= 2, ErrorCode::invalid_argument,
            "elbow selection needs at least 2 values");
    std::size_t p = values.size();
    if (max_candidates) p = std::min(p, std::max<std::size_t>(2, *max_candidates));
    const auto head = values.first(p);
    for (std::size_t i = 0; i < p; ++i)
        require(std::isfinite(head[i]), ErrorCode::invalid_argument, "non-finite value");
    for (std::size_t i = 1; i < p; ++i)
        require(head[i] <= head[i - 1], ErrorCode::invalid_argument,
                "elbow values must be non-increasing");

    double mean_square = 0.0;
    for (double v : head) mean_square += v * v;
    mean_square /= static_cast<double>(p);
    const double floor = 1e-12 * std::max(mean_square, std::numeric_limits<double>::min());

    std::size_t best = 1;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 1; q < p; ++q) {
        const double ll = elbow_profile_loglik(head, q, floor);
        if (ll > best_ll) {
            best_ll = ll;
            best = q;
        }
    }
    return best;
}

inline std::size_t elbow_dimension(const Vector& values,
                                   std::optional<std::size_t> max_candidates = std::nullopt) {
    return elbow_dimension(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())),
                           max_candidates);
}

/// Default cap on how many leading values feed the elbow scan.
inline std::size_t default_elbow_candidates(std::size_t n) { return std::min<std::size_t>(n, 100); }

} // namespace cosie
