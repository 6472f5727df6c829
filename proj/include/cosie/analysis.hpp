#pragma once

#include "cosie/error.hpp"
#include "cosie/graph.hpp"
#include "cosie/random.hpp"
#include "cosie/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace cosie {

/// D_ij = ||S_i - S_j||_F for any list of equally shaped matrices.
inline Matrix distance_matrix(const std::vector<Matrix>& items) {
    const auto m = static_cast<Eigen::Index>(items.size());
    Matrix d = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        require(items[static_cast<std::size_t>(i)].rows() == items[0].rows() &&
                    items[static_cast<std::size_t>(i)].cols() == items[0].cols(),
                ErrorCode::dimension_mismatch,
                "item " + std::to_string(i) + " differs in shape from item 0");
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = (items[static_cast<std::size_t>(i)] - items[static_cast<std::size_t>(j)]).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

inline void validate_distance_matrix(const Matrix& d) {
    require(d.rows() == d.cols(), ErrorCode::dimension_mismatch, "distance matrix must be square");
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        require(d(i, i) == 0.0, ErrorCode::validation, "distance matrix must have a zero diagonal");
        for (Eigen::Index j = 0; j < i; ++j)
            require(std::isfinite(d(i, j)) && d(i, j) >= 0.0 && d(i, j) == d(j, i), ErrorCode::validation,
                    "distance matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                        ") is negative, non-finite or asymmetric");
    }
}

/// Classical multidimensional scaling into k dimensions.
inline Matrix cmds(const Matrix& d, std::size_t k) {
    validate_distance_matrix(d);
    const auto m = d.rows();
    require(k >= 1 && k <= static_cast<std::size_t>(m), ErrorCode::invalid_argument,
            "k=" + std::to_string(k) + " must lie in [1, m=" + std::to_string(m) + "]");
    const Matrix sq = d.cwiseProduct(d);
    const Vector row_means = sq.rowwise().mean();
    const double grand = sq.mean();
    Matrix b(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) b(i, j) = -0.5 * (sq(i, j) - row_means(i) - row_means(j) + grand);
    b = 0.5 * (b + b.transpose()).eval();

    const auto eig = full_eig(b);  // ascending
    Matrix x = Matrix::Zero(m, static_cast<Eigen::Index>(k));
    for (std::size_t c = 0; c < k; ++c) {
        const Eigen::Index src = m - 1 - static_cast<Eigen::Index>(c);
        const double lam = eig.values(src);
        if (lam <= 0.0) continue;
        x.col(static_cast<Eigen::Index>(c)) = eig.vectors.col(src) * std::sqrt(lam);
    }
    normalize_signs(x);
    return x;
}

/// Label of the nearest reference item for each query, ties to the lowest index.
inline std::vector<std::string> nearest_neighbor_predict(const Matrix& d,
                                                         const std::vector<std::size_t>& reference,
                                                         const std::vector<std::string>& labels,
                                                         const std::vector<std::size_t>& queries) {
    require(!reference.empty(), ErrorCode::invalid_argument, "no reference items");
    std::vector<std::string> out;
    out.reserve(queries.size());
    for (const auto q : queries) {
        std::size_t best = reference.front();
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto r : reference) {
            const double v = d(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(r));
            if (v < best_d || (v == best_d && r < best)) {
                best_d = v;
                best = r;
            }
        }
        out.push_back(labels.at(best));
    }
    return out;
}

struct FoldReport {
    std::size_t tested = 0;
    std::size_t correct = 0;
};

struct CvResult {
    double accuracy = 0.0;
    std::vector<FoldReport> folds;
    std::vector<std::size_t> fold_of;  // fold index per item
};

/// Stratified fold assignment: within each label (in first-appearance
/// order) items are shuffled and dealt round-robin, continuing the dealing
/// position across labels so fold sizes stay balanced.
inline std::vector<std::size_t> stratified_folds(const std::vector<std::string>& labels, std::size_t folds,
                                                 Rng& rng) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& v = members[labels[i]];
        if (v.empty()) order.push_back(labels[i]);
        v.push_back(i);
    }
    std::vector<std::size_t> fold_of(labels.size());
    std::size_t next = 0;
    for (const auto& lab : order) {
        auto idx = members[lab];
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        for (const auto i : idx) fold_of[i] = next++ % folds;
    }
    return fold_of;
}

/// k-fold cross-validated nearest-neighbour accuracy on a precomputed
/// distance matrix. Each held-out item gets the majority label among its
/// k_neighbors nearest training items (ties: nearest wins).
inline CvResult knn_cv_classify(const Matrix& d, const std::vector<std::string>& labels, std::size_t folds,
                                std::size_t k_neighbors, Rng rng) {
    validate_distance_matrix(d);
    const std::size_t m = static_cast<std::size_t>(d.rows());
    require(labels.size() == m, ErrorCode::dimension_mismatch,
            "got " + std::to_string(labels.size()) + " labels for " + std::to_string(m) + " items");
    require(folds >= 2, ErrorCode::invalid_argument, "need at least 2 folds");
    require(folds <= m, ErrorCode::invalid_argument,
            "folds=" + std::to_string(folds) + " leaves a fold with no training items (m=" +
                std::to_string(m) + ")");
    require(k_neighbors >= 1, ErrorCode::invalid_argument, "k_neighbors must be >= 1");

    CvResult res;
    res.fold_of = stratified_folds(labels, folds, rng);
    res.folds.resize(folds);
    std::size_t correct = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < m; ++i) (res.fold_of[i] == f ? test : train).push_back(i);
        require(!train.empty(), ErrorCode::invalid_argument, "fold " + std::to_string(f) + " has no training items");
        for (const auto q : test) {
            std::vector<std::size_t> nb = train;
            std::stable_sort(nb.begin(), nb.end(), [&](std::size_t a, std::size_t b) {
                return d(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(a)) <
                       d(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(b));
            });
            nb.resize(std::min(k_neighbors, nb.size()));
            std::map<std::string, std::size_t> votes;
            for (const auto r : nb) ++votes[labels[r]];
            std::string best = labels[nb.front()];
            for (const auto r : nb)
                if (votes[labels[r]] > votes[best]) best = labels[r];
            ++res.folds[f].tested;
            if (best == labels[q]) {
                ++res.folds[f].correct;
                ++correct;
            }
        }
    }
    res.accuracy = m ? static_cast<double>(correct) / static_cast<double>(m) : 0.0;
    return res;
}

} // namespace cosie
