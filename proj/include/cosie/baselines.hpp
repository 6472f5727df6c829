#pragma once

#include "cosie/error.hpp"
#include "cosie/graph.hpp"
#include "cosie/spectral.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace cosie {

/// Unscaled ASE of the mean adjacency matrix.
inline Matrix mean_ase(const GraphCollection& graphs, std::size_t d) {
    require(graphs.size() >= 1, ErrorCode::invalid_argument, "need at least one graph");
    Matrix mean = Matrix::Zero(static_cast<Eigen::Index>(graphs.n()), static_cast<Eigen::Index>(graphs.n()));
    for (const auto& g : graphs) mean += g.entries();
    mean /= static_cast<double>(graphs.size());
    return ase(mean, d, false);
}

/// Default cap on m*n for an explicitly assembled omnibus matrix (8000^2
/// doubles is about 512 MB).
inline constexpr std::size_t default_omnibus_assembly_cap = 8000;

/// The mn x mn omnibus matrix with block (i, j) = (A_i + A_j) / 2.
inline Matrix omnibus_matrix(const GraphCollection& graphs,
                             std::size_t cap = default_omnibus_assembly_cap) {
    const std::size_t m = graphs.size(), n = graphs.n();
    require(m >= 1, ErrorCode::invalid_argument, "need at least one graph");
    require(m * n <= cap, ErrorCode::invalid_argument,
            "omnibus matrix of size " + std::to_string(m * n) + " exceeds the cap " + std::to_string(cap));
    const auto nn = static_cast<Eigen::Index>(n);
    Matrix big(static_cast<Eigen::Index>(m * n), static_cast<Eigen::Index>(m * n));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            big.block(static_cast<Eigen::Index>(i) * nn, static_cast<Eigen::Index>(j) * nn, nn, nn) =
                0.5 * (graphs[i].entries() + graphs[j].entries());
    return big;
}

struct OmniEmbedding {
    std::vector<Matrix> positions;  // one n x d block per graph
    Vector values;                  // the d omnibus eigenvalues used for scaling
};

/// Default cap on m*n for omni_embed.
inline constexpr std::size_t default_omni_cap = 200000;

/// Scaled ASE of the omnibus matrix, split into per-graph row blocks.
///
/// M is never formed. With Y = [B E], B the stacked A_i and E the stacked
/// identities, M = Y J Y^T / 2 where J swaps the two halves. Writing
/// G = Y^T Y and H = G^{1/2}, the nonzero eigenpairs of M are those of
/// S = H J H / 2 (2n x 2n), and an eigenvector w of S with eigenvalue
/// lambda maps to Y J H w / (2 lambda). G needs only sum A_i^2 and sum A_i.
inline OmniEmbedding omni_embed(const GraphCollection& graphs, std::size_t d,
                                std::size_t cap = default_omni_cap) {
    const std::size_t m = graphs.size(), n = graphs.n();
    require(m >= 1, ErrorCode::invalid_argument, "need at least one graph");
    require(m * n <= cap, ErrorCode::invalid_argument,
            "omnibus problem of size " + std::to_string(m * n) + " exceeds the cap " + std::to_string(cap));
    require(d >= 1 && d <= m * n, ErrorCode::invalid_argument, "d must lie in [1, m*n]");
    const auto nn = static_cast<Eigen::Index>(n);

    Matrix sum = Matrix::Zero(nn, nn), sum_sq = Matrix::Zero(nn, nn);
    for (const auto& g : graphs) {
        sum += g.entries();
        sum_sq.selfadjointView<Eigen::Lower>().rankUpdate(g.entries());
    }
    sum_sq = sum_sq.selfadjointView<Eigen::Lower>();

    Matrix gram(2 * nn, 2 * nn);
    gram.topLeftCorner(nn, nn) = sum_sq;
    gram.topRightCorner(nn, nn) = sum;
    gram.bottomLeftCorner(nn, nn) = sum;
    gram.bottomRightCorner(nn, nn) = static_cast<double>(m) * Matrix::Identity(nn, nn);

    const auto ges = full_eig(gram);
    const Matrix root = ges.vectors * ges.values.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                        ges.vectors.transpose();
    Matrix swapped(2 * nn, 2 * nn);  // J * root
    swapped.topRows(nn) = root.bottomRows(nn);
    swapped.bottomRows(nn) = root.topRows(nn);
    Matrix reduced = 0.5 * root * swapped;
    reduced = 0.5 * (reduced + reduced.transpose()).eval();

    const std::size_t rank_bound = 2 * n;
    require(d <= rank_bound, ErrorCode::invalid_argument,
            "omnibus matrix has rank at most 2n=" + std::to_string(rank_bound) + " < d");
    const auto eig = top_eigs(reduced, d);

    // Coefficients c such that eigenvector block i = A_i c_top + c_bottom.
    Matrix coef = swapped * eig.vectors;
    for (Eigen::Index j = 0; j < coef.cols(); ++j) {
        const double lam = eig.values(j);
        coef.col(j) /= (lam != 0.0 ? 2.0 * lam : 1.0);
    }
    const Matrix top = coef.topRows(nn), bottom = coef.bottomRows(nn);

    Matrix stacked(static_cast<Eigen::Index>(m) * nn, static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < m; ++i)
        stacked.middleRows(static_cast<Eigen::Index>(i) * nn, nn) = graphs[i].entries() * top + bottom;
    for (Eigen::Index j = 0; j < stacked.cols(); ++j) {
        const double norm = stacked.col(j).norm();
        if (norm > 0.0) stacked.col(j) /= norm;
    }
    normalize_signs(stacked);
    stacked *= eig.values.cwiseAbs().cwiseSqrt().asDiagonal();

    OmniEmbedding out;
    out.values = eig.values;
    for (std::size_t i = 0; i < m; ++i)
        out.positions.push_back(stacked.middleRows(static_cast<Eigen::Index>(i) * nn, nn));
    return out;
}

/// Scaled ASE of an explicitly assembled omnibus matrix; reference route for
/// small problems.
inline OmniEmbedding omni_embed_dense(const GraphCollection& graphs, std::size_t d,
                                      std::size_t cap = default_omnibus_assembly_cap) {
    const Matrix big = omnibus_matrix(graphs, cap);
    const auto eig = top_eigs(big, d);
    const Matrix x = eig.vectors * eig.values.cwiseAbs().cwiseSqrt().asDiagonal();
    const auto nn = static_cast<Eigen::Index>(graphs.n());
    OmniEmbedding out;
    out.values = eig.values;
    for (std::size_t i = 0; i < graphs.size(); ++i)
        out.positions.push_back(x.middleRows(static_cast<Eigen::Index>(i) * nn, nn));
    return out;
}

} // namespace cosie
