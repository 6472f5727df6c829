#pragma once

#include "cosie/error.hpp"
#include "cosie/graph.hpp"
#include "cosie/parallel.hpp"
#include "cosie/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace cosie {

// Subspace geometry ---------------------------------------------------------

/// Orthogonal W minimizing ||Vhat - V W||_F: W = Q1 Q2^T where
/// V^T Vhat = Q1 D Q2^T.
inline Matrix procrustes_align(const Matrix& vhat, const Matrix& v) {
    require(vhat.rows() == v.rows() && vhat.cols() == v.cols(), ErrorCode::dimension_mismatch,
            "procrustes_align needs two n x d bases of equal shape");
    Eigen::JacobiSVD<Matrix> svd(v.transpose() * vhat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

enum class SubspaceNorm { frobenius, spectral };

/// Norm of V1 V1^T - V2 V2^T.
///
/// Evaluated on span[V1 V2] through a thin QR.
inline double projection_distance(const Matrix& v1, const Matrix& v2,
                                  SubspaceNorm norm = SubspaceNorm::frobenius) {
    require(v1.rows() == v2.rows(), ErrorCode::dimension_mismatch,
            "projection_distance needs bases with the same number of rows");
    const auto n = v1.rows();
    const auto k = v1.cols() + v2.cols();
    if (k == 0 || n == 0) return 0.0;
    Matrix both(n, k);
    both << v1, v2;
    Eigen::HouseholderQR<Matrix> qr(both);
    const auto q_cols = std::min(n, k);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, q_cols);
    const Matrix x = q.transpose() * v1;
    const Matrix y = q.transpose() * v2;
    Matrix diff = x * x.transpose() - y * y.transpose();
    diff = 0.5 * (diff + diff.transpose()).eval();
    if (norm == SubspaceNorm::frobenius) return diff.norm();
    Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Clustering ----------------------------------------------------------------

struct KMeansOptions {
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    double tol = 1e-8;  // relative decrease of the squared cost
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct ClusterResult {
    std::vector<std::size_t> assignment;  // labels in [0, K)
    Matrix centroids;                     // K x d
    double cost = 0.0;                    // ||Z C - X||_F
    std::size_t iterations = 0;
};

namespace detail {

inline double squared_cost(const Matrix& x, const std::vector<std::size_t>& labels,
                           const Matrix& centroids) {
    double s = 0.0;
    for (Eigen::Index u = 0; u < x.rows(); ++u)
        s += (x.row(u) - centroids.row(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(u)])))
                 .squaredNorm();
    return s;
}

inline Matrix kmeanspp_init(const Matrix& x, std::size_t k, Rng& rng) {
    const auto n = x.rows();
    Matrix c(static_cast<Eigen::Index>(k), x.cols());
    c.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Vector dist2(n);
    for (Eigen::Index u = 0; u < n; ++u) dist2(u) = (x.row(u) - c.row(0)).squaredNorm();
    for (std::size_t j = 1; j < k; ++j) {
        const double total = dist2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (Eigen::Index u = 0; u < n; ++u) {
                acc += dist2(u);
                if (acc > target) {
                    pick = u;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        c.row(static_cast<Eigen::Index>(j)) = x.row(pick);
        for (Eigen::Index u = 0; u < n; ++u)
            dist2(u) = std::min(dist2(u), (x.row(u) - c.row(static_cast<Eigen::Index>(j))).squaredNorm());
    }
    return c;
}

inline ClusterResult lloyd(const Matrix& x, Matrix centroids, const KMeansOptions& opts) {
    const auto n = x.rows();
    const auto k = centroids.rows();
    ClusterResult res;
    res.assignment.assign(static_cast<std::size_t>(n), 0);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < std::max<std::size_t>(opts.max_iter, 1); ++it) {
        res.iterations = it + 1;
        for (Eigen::Index u = 0; u < n; ++u) {
            Eigen::Index best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < k; ++j) {
                const double dd = (x.row(u) - centroids.row(j)).squaredNorm();
                if (dd < best_d) {
                    best_d = dd;
                    best = j;
                }
            }
            res.assignment[static_cast<std::size_t>(u)] = static_cast<std::size_t>(best);
        }
        // Empty clusters take the point farthest from its current centroid.
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (auto l : res.assignment) ++counts[l];
        for (Eigen::Index j = 0; j < k; ++j) {
            if (counts[static_cast<std::size_t>(j)] > 0) continue;
            Eigen::Index far = -1;
            double far_d = -1.0;
            for (Eigen::Index u = 0; u < n; ++u) {
                const auto l = res.assignment[static_cast<std::size_t>(u)];
                if (counts[l] <= 1) continue;
                const double dd = (x.row(u) - centroids.row(static_cast<Eigen::Index>(l))).squaredNorm();
                if (dd > far_d) {
                    far_d = dd;
                    far = u;
                }
            }
            if (far < 0) continue;
            --counts[res.assignment[static_cast<std::size_t>(far)]];
            res.assignment[static_cast<std::size_t>(far)] = static_cast<std::size_t>(j);
            counts[static_cast<std::size_t>(j)] = 1;
        }
        centroids.setZero();
        for (Eigen::Index u = 0; u < n; ++u)
            centroids.row(static_cast<Eigen::Index>(res.assignment[static_cast<std::size_t>(u)])) += x.row(u);
        for (Eigen::Index j = 0; j < k; ++j)
            if (counts[static_cast<std::size_t>(j)] > 0)
                centroids.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
        const double cost = squared_cost(x, res.assignment, centroids);
        const bool converged = prev - cost <= opts.tol * std::max(prev, 1e-300);
        prev = cost;
        if (converged) break;
    }
    res.centroids = std::move(centroids);
    res.cost = std::sqrt(squared_cost(x, res.assignment, res.centroids));
    return res;
}

} // namespace detail

/// K-means on the rows of `x`: Lloyd iterations from k-means++ seeds, best of
/// `restarts` runs (lowest restart index on equal cost). Restart r draws from
/// Rng(seed).derive(r).
inline ClusterResult kmeans_cluster(const Matrix& x, std::size_t k, const KMeansOptions& opts = {}) {
    const auto n = static_cast<std::size_t>(x.rows());
    require(k >= 1, ErrorCode::invalid_argument, "K must be >= 1");
    require(k <= n, ErrorCode::invalid_argument,
            "K=" + std::to_string(k) + " exceeds the number of points n=" + std::to_string(n));
    const Rng base(opts.seed);
    const std::size_t restarts = std::max<std::size_t>(opts.restarts, 1);
    auto runs = parallel_map<ClusterResult>(restarts, opts.threads, [&](std::size_t r) {
        Rng rng = base.derive(r);
        return detail::lloyd(x, detail::kmeanspp_init(x, k, rng), opts);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].cost < runs[best].cost) best = r;
    return std::move(runs[best]);
}

namespace detail {

/// Maximum-weight perfect matching on a square matrix (Hungarian algorithm,
/// O(K^3)); returns col index matched to each row.
inline std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& w) {
    const std::size_t k = w.size();
    const double inf = std::numeric_limits<double>::infinity();
    // Solve min-cost on c = -w with 1-based potentials.
    std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0);
    std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
    for (std::size_t i = 1; i <= k; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(k + 1, inf);
        std::vector<char> used(k + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= k; ++j) {
                if (used[j]) continue;
                const double cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= k; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> row_to_col(k);
    for (std::size_t j = 1; j <= k; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

} // namespace detail

/// Minimum, over relabelings of `estimated`, of the number of vertices whose
/// label disagrees with `truth`. Exhaustive for K <= 8, Hungarian otherwise.
inline std::size_t misclustering_count(std::span<const std::size_t> estimated,
                                       std::span<const std::size_t> truth, std::size_t k) {
    require(estimated.size() == truth.size(), ErrorCode::dimension_mismatch,
            "label vectors differ in length");
    require(k >= 1, ErrorCode::invalid_argument, "K must be >= 1");
    std::vector<std::vector<double>> confusion(k, std::vector<double>(k, 0.0));
    for (std::size_t u = 0; u < truth.size(); ++u) {
        require(estimated[u] < k && truth[u] < k, ErrorCode::invalid_argument,
                "label out of range at vertex " + std::to_string(u));
        confusion[estimated[u]][truth[u]] += 1.0;
    }
    const auto n = truth.size();
    double agree = 0.0;
    if (k <= 8) {
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        do {
            double s = 0.0;
            for (std::size_t a = 0; a < k; ++a) s += confusion[a][perm[a]];
            agree = std::max(agree, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        const auto match = detail::max_weight_assignment(confusion);
        for (std::size_t a = 0; a < k; ++a) agree += confusion[a][match[a]];
    }
    return n - static_cast<std::size_t>(std::llround(agree));
}

// Score-matrix inference ----------------------------------------------------

/// Eigenvalues of a symmetric score matrix, by decreasing magnitude.
inline Vector estimate_eigenvalues(const Matrix& rhat) {
    require(rhat.rows() == rhat.cols(), ErrorCode::dimension_mismatch, "score matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rhat + rhat.transpose()), Eigen::EigenvaluesOnly);
    std::vector<double> vals(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::stable_sort(vals.begin(), vals.end(), [](double a, double b) {
        return std::abs(a) > std::abs(b) || (std::abs(a) == std::abs(b) && a > b);
    });
    return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

/// Position of entry (k, l), k <= l (0-based), in the upper-triangle vector;
/// the 0-based form of (2k + l(l-1))/2 with 1-based indices.
inline constexpr std::size_t vec_index(std::size_t k, std::size_t l) noexcept {
    return k + l * (l + 1) / 2;
}

inline constexpr std::size_t vec_length(std::size_t d) noexcept { return d * (d + 1) / 2; }

/// Inverse of vec_index: the (k, l) pair stored at position `idx`.
inline std::pair<std::size_t, std::size_t> vec_pair(std::size_t idx) noexcept {
    std::size_t l = 0;
    while ((l + 1) * (l + 2) / 2 <= idx) ++l;
    return {idx - l * (l + 1) / 2, l};
}

/// Upper triangle (diagonal included) stacked column by column.
inline Vector vec_upper(const Matrix& r) {
    require(r.rows() == r.cols(), ErrorCode::dimension_mismatch, "vec_upper needs a square matrix");
    const double tol = 1e-12 * std::max(1.0, r.size() ? r.cwiseAbs().maxCoeff() : 0.0);
    const auto d = static_cast<std::size_t>(r.rows());
    Vector out(static_cast<Eigen::Index>(vec_length(d)));
    for (std::size_t l = 0; l < d; ++l) {
        for (std::size_t k = 0; k <= l; ++k) {
            const auto kk = static_cast<Eigen::Index>(k), ll = static_cast<Eigen::Index>(l);
            if (std::abs(r(kk, ll) - r(ll, kk)) > tol)
                throw ValidationError("vec_upper input is not symmetric", std::make_pair(k, l));
            out(static_cast<Eigen::Index>(vec_index(k, l))) = r(kk, ll);
        }
    }
    return out;
}

inline Matrix unvec_upper(const Vector& v, std::size_t d) {
    require(static_cast<std::size_t>(v.size()) == vec_length(d), ErrorCode::dimension_mismatch,
            "vector length does not match d(d+1)/2");
    Matrix r(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t l = 0; l < d; ++l)
        for (std::size_t k = 0; k <= l; ++k) {
            const double x = v(static_cast<Eigen::Index>(vec_index(k, l)));
            r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = x;
            r(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = x;
        }
    return r;
}

/// Asymptotic covariance of vec(Rhat) for a graph with probability matrix P
/// and common subspace V (r x r, r = d(d+1)/2).
struct ScoreCovariance {
    Matrix sigma;
    std::size_t d = 0;

    std::size_t r() const noexcept { return vec_length(d); }
};

/// Sigma_{(k,l),(k',l')} = sum_{s<t} P_st (1 - P_st)
///     (V_sk V_tl + V_tk V_sl)(V_sk' V_tl' + V_sl' V_tk').
/// Accumulated one source vertex s at a time as G_s^T diag(w) G_s.
inline ScoreCovariance score_covariance(const Matrix& v, const Matrix& p) {
    require(p.rows() == p.cols() && p.rows() == v.rows(), ErrorCode::dimension_mismatch,
            "P must be n x n for an n x d basis");
    const auto n = v.rows();
    const auto d = static_cast<std::size_t>(v.cols());
    const auto r = static_cast<Eigen::Index>(vec_length(d));
    ScoreCovariance out;
    out.d = d;
    out.sigma = Matrix::Zero(r, r);
    for (Eigen::Index s = 0; s + 1 < n; ++s) {
        const Eigen::Index len = n - s - 1;
        Vector w(len);
        for (Eigen::Index t = 0; t < len; ++t) {
            const double pst = p(s, s + 1 + t);
            w(t) = pst * (1.0 - pst);
        }
        if (w.cwiseAbs().maxCoeff() == 0.0) continue;
        Matrix g(len, r);
        for (std::size_t l = 0; l < d; ++l) {
            for (std::size_t k = 0; k <= l; ++k) {
                const auto kk = static_cast<Eigen::Index>(k), ll = static_cast<Eigen::Index>(l);
                g.col(static_cast<Eigen::Index>(vec_index(k, l))) =
                    v(s, kk) * v.col(ll).tail(len) + v(s, ll) * v.col(kk).tail(len);
            }
        }
        out.sigma.noalias() += g.transpose() * w.asDiagonal() * g;
    }
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
    return out;
}

inline ScoreCovariance score_covariance(const Matrix& v, const Graph& p) {
    require(p.kind() == GraphKind::probability, ErrorCode::invalid_argument,
            "score_covariance needs a probability matrix");
    return score_covariance(v, p.entries());
}

/// Entrywise z-values diag(Sigma)^{-1/2} vec(W Rhat W^T - R).
inline Vector standardize_scores(const Matrix& rhat, const Matrix& r_true, const Matrix& w,
                                 const ScoreCovariance& cov) {
    require(rhat.rows() == r_true.rows() && rhat.cols() == r_true.cols() && w.rows() == rhat.rows() &&
                w.cols() == rhat.cols() && cov.d == static_cast<std::size_t>(rhat.rows()),
            ErrorCode::dimension_mismatch, "standardize_scores inputs are not conformable");
    const Vector diag = cov.sigma.diagonal();
    for (Eigen::Index a = 0; a < diag.size(); ++a)
        require(diag(a) > 0.0, ErrorCode::degenerate_covariance,
                "zero variance at vec position " + std::to_string(a));
    Matrix aligned = w * rhat * w.transpose();
    aligned = 0.5 * (aligned + aligned.transpose()).eval();
    Matrix diff = aligned - r_true;
    diff = 0.5 * (diff + diff.transpose()).eval();
    return vec_upper(diff).cwiseQuotient(diag.cwiseSqrt());
}

} // namespace cosie
