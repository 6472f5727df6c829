#pragma once

#include "cosie/error.hpp"
#include "cosie/graph.hpp"
#include "cosie/parallel.hpp"
#include "cosie/spectral.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace cosie {

/// Fit settings. An empty `d` or `graph_dims` selects the dimension by the
/// scree-plot elbow. `graph_dims` holds either one value for every graph or
/// one value per graph.
struct MaseOptions {
    std::optional<std::size_t> d;
    std::optional<std::vector<std::size_t>> graph_dims;
    bool scaled = false;
    std::size_t threads = 1;
    std::optional<std::size_t> max_elbow_candidates;
};

struct MaseEmbedding {
    Matrix basis;                         // Vhat, n x d, orthonormal columns
    std::vector<Matrix> scores;           // Rhat_i = Vhat^T A_i Vhat
    std::vector<std::size_t> graph_dims;  // d_i used in the per-graph embeddings
    Vector singular_values;               // spectrum of the concatenated embedding
    std::size_t d = 0;
    std::size_t numerical_rank = 0;       // of the concatenated embedding
    bool scaled = false;
    std::vector<std::string> warnings;

    std::size_t n() const noexcept { return static_cast<std::size_t>(basis.rows()); }
    std::size_t m() const noexcept { return scores.size(); }
};

/// Rhat = Vhat^T A Vhat, symmetrized to cancel round-off.
inline Matrix score_matrix(const Matrix& basis, const Matrix& a) {
    require(basis.rows() == a.rows() && a.rows() == a.cols(), ErrorCode::dimension_mismatch,
            "basis has " + std::to_string(basis.rows()) + " rows but the graph has n=" +
                std::to_string(a.rows()));
    const Matrix av = a * basis;
    Matrix r = basis.transpose() * av;
    return 0.5 * (r + r.transpose());
}

inline Matrix score_matrix(const Matrix& basis, const Graph& a) { return score_matrix(basis, a.entries()); }

/// Phat = Vhat Rhat Vhat^T, optionally clamped to [0, 1].
inline Matrix reconstruct_p(const Matrix& basis, const Matrix& score, bool clip) {
    require(basis.cols() == score.rows() && score.rows() == score.cols(),
            ErrorCode::dimension_mismatch, "score matrix must be d x d for an n x d basis");
    Matrix p = basis * score * basis.transpose();
    p = 0.5 * (p + p.transpose()).eval();
    if (clip) p = p.cwiseMax(0.0).cwiseMin(1.0);
    return p;
}

/// Singular values of a rectangular matrix in decreasing order.
inline Vector singular_values(const Matrix& u) {
    if (u.cols() > u.rows()) {
        Matrix gram = u * u.transpose();
        gram = 0.5 * (gram + gram.transpose()).eval();
        return eigenvalues_by_magnitude(gram).cwiseMax(0.0).cwiseSqrt();
    }
    Eigen::BDCSVD<Matrix> svd(u);
    return svd.singularValues();
}

/// Elbow-selected embedding dimension of one graph, scanning |eigenvalues|.
inline std::size_t select_graph_dimension(const Matrix& a,
                                          std::optional<std::size_t> max_candidates = std::nullopt) {
    const auto n = static_cast<std::size_t>(a.rows());
    if (n < 2) return 1;
    const Vector mags = eigenvalues_by_magnitude(a).cwiseAbs();
    return elbow_dimension(mags, max_candidates.value_or(default_elbow_candidates(n)));
}

/// Multiple adjacency spectral embedding.
///  1. per-graph ASE at d_i (scaled or not),
///  2. concatenate into Uhat (n x sum d_i),
///  3. Vhat = top-d left singular vectors of Uhat,
///  4. Rhat_i = Vhat^T A_i Vhat.
inline MaseEmbedding mase_fit(const GraphCollection& graphs, const MaseOptions& opts = {}) {
    const std::size_t m = graphs.size();
    require(m >= 1, ErrorCode::invalid_argument, "need at least one graph");
    const std::size_t n = graphs.n();
    require(n >= 1, ErrorCode::invalid_argument, "graphs have no vertices");

    std::vector<std::optional<std::size_t>> requested(m);
    if (opts.graph_dims) {
        const auto& dims = *opts.graph_dims;
        require(dims.size() == 1 || dims.size() == m, ErrorCode::invalid_argument,
                "graph_dims must hold 1 or m values");
        for (std::size_t i = 0; i < m; ++i) requested[i] = dims.size() == 1 ? dims[0] : dims[i];
    }
    for (std::size_t i = 0; i < m; ++i)
        if (requested[i])
            require(*requested[i] >= 1 && *requested[i] <= n, ErrorCode::invalid_argument,
                    "d_" + std::to_string(i) + "=" + std::to_string(*requested[i]) +
                        " must lie in [1, n=" + std::to_string(n) + "]");

    struct Step1 {
        Matrix embedding;
        std::size_t dim = 0;
    };
    const auto per_graph = parallel_map<Step1>(m, opts.threads, [&](std::size_t i) {
        const Matrix& a = graphs[i].entries();
        const std::size_t di =
            requested[i] ? *requested[i] : select_graph_dimension(a, opts.max_elbow_candidates);
        return Step1{ase(a, di, opts.scaled), di};
    });

    MaseEmbedding out;
    out.scaled = opts.scaled;
    std::size_t total = 0;
    for (const auto& s : per_graph) {
        out.graph_dims.push_back(s.dim);
        total += s.dim;
    }
    Matrix concat(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(total));
    Eigen::Index col = 0;
    for (const auto& s : per_graph) {
        concat.middleCols(col, s.embedding.cols()) = s.embedding;
        col += s.embedding.cols();
    }

    out.singular_values = singular_values(concat);
    const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
    const double rank_tol = smax * 1e-10;
    out.numerical_rank = static_cast<std::size_t>((out.singular_values.array() > rank_tol).count());

    if (opts.d) {
        out.d = *opts.d;
        require(out.d >= 1, ErrorCode::invalid_argument, "joint dimension must be >= 1");
        require(out.d <= total, ErrorCode::invalid_argument,
                "joint dimension d=" + std::to_string(out.d) + " exceeds sum of d_i=" +
                    std::to_string(total));
        require(out.d <= n, ErrorCode::invalid_argument,
                "joint dimension d=" + std::to_string(out.d) + " exceeds n=" + std::to_string(n));
    } else if (out.singular_values.size() < 2) {
        out.d = 1;
    } else {
        out.d = elbow_dimension(out.singular_values,
                                opts.max_elbow_candidates.value_or(default_elbow_candidates(n)));
    }
    if (out.numerical_rank < out.d)
        out.warnings.push_back("concatenated embedding has numerical rank " +
                               std::to_string(out.numerical_rank) + " < d=" + std::to_string(out.d) +
                               "; trailing directions of Vhat are arbitrary");

    out.basis = top_left_singular(concat, out.d).vectors;
    out.scores = parallel_map<Matrix>(m, opts.threads, [&](std::size_t i) {
        return score_matrix(out.basis, graphs[i].entries());
    });
    return out;
}

/// Scores a new graph against a fitted basis. The embedding is not modified.
inline Matrix out_of_sample(const MaseEmbedding& embedding, const Graph& a_new) {
    return score_matrix(embedding.basis, a_new.entries());
}

/// Per-graph probability estimates Vhat Rhat_i Vhat^T.
inline Matrix reconstruct_p(const MaseEmbedding& embedding, std::size_t i, bool clip) {
    return reconstruct_p(embedding.basis, embedding.scores.at(i), clip);
}

} // namespace cosie
