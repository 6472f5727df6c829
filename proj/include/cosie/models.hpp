#pragma once

#include "cosie/error.hpp"
#include "cosie/graph.hpp"
#include "cosie/io.hpp"
#include "cosie/parallel.hpp"
#include "cosie/random.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace cosie {

/// Common-subspace independent-edge model: every graph's probability matrix
/// is V R_i V^T with a shared orthonormal basis V (n x d) and symmetric
/// d x d score matrices R_i.
class CosieParams {
public:
    CosieParams() = default;

    CosieParams(Matrix basis, std::vector<Matrix> scores)
        : basis_(std::move(basis)), scores_(std::move(scores)) {
        const auto d = basis_.cols();
        require(d >= 1 && basis_.rows() >= d, ErrorCode::invalid_parameters,
                "basis must be n x d with 1 <= d <= n");
        const double ortho = (basis_.transpose() * basis_ - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
        require(ortho <= 1e-10, ErrorCode::invalid_parameters,
                "basis columns are not orthonormal (max deviation " + std::to_string(ortho) + ")");
        require(!scores_.empty(), ErrorCode::invalid_parameters, "need at least one score matrix");
        for (std::size_t i = 0; i < scores_.size(); ++i) {
            auto& r = scores_[i];
            require(r.rows() == d && r.cols() == d, ErrorCode::dimension_mismatch,
                    "score matrix " + std::to_string(i) + " must be d x d");
            const double asym = (r - r.transpose()).cwiseAbs().maxCoeff();
            require(asym <= 1e-12 * std::max(1.0, r.cwiseAbs().maxCoeff()),
                    ErrorCode::invalid_parameters,
                    "score matrix " + std::to_string(i) + " is not symmetric");
            r = 0.5 * (r + r.transpose()).eval();
        }
    }

    std::size_t n() const noexcept { return static_cast<std::size_t>(basis_.rows()); }
    std::size_t d() const noexcept { return static_cast<std::size_t>(basis_.cols()); }
    std::size_t m() const noexcept { return scores_.size(); }
    const Matrix& basis() const noexcept { return basis_; }
    const std::vector<Matrix>& scores() const noexcept { return scores_; }
    const Matrix& score(std::size_t i) const { return scores_.at(i); }

private:
    Matrix basis_;
    std::vector<Matrix> scores_;
};

/// Multilayer stochastic blockmodel: fixed communities z (0-based labels in
/// [0, K)) and one symmetric K x K block matrix per graph.
class MultilayerSbmParams {
public:
    MultilayerSbmParams() = default;

    MultilayerSbmParams(std::vector<std::size_t> z, std::vector<Matrix> blocks)
        : z_(std::move(z)), blocks_(std::move(blocks)) {
        require(!z_.empty(), ErrorCode::invalid_parameters, "membership vector is empty");
        require(!blocks_.empty(), ErrorCode::invalid_parameters, "need at least one block matrix");
        k_ = static_cast<std::size_t>(blocks_.front().rows());
        require(k_ >= 1, ErrorCode::invalid_parameters, "block matrices must be non-empty");
        std::vector<std::size_t> sizes(k_, 0);
        for (std::size_t u = 0; u < z_.size(); ++u) {
            require(z_[u] < k_, ErrorCode::invalid_parameters,
                    "community label " + std::to_string(z_[u]) + " of vertex " +
                        std::to_string(u) + " is outside [0, " + std::to_string(k_) + ")");
            ++sizes[z_[u]];
        }
        for (std::size_t k = 0; k < k_; ++k)
            require(sizes[k] > 0, ErrorCode::invalid_parameters,
                    "empty community " + std::to_string(k));
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const auto& b = blocks_[i];
            require(static_cast<std::size_t>(b.rows()) == k_ && b.rows() == b.cols(),
                    ErrorCode::dimension_mismatch,
                    "block matrix " + std::to_string(i) + " must be K x K");
            require(b == b.transpose(), ErrorCode::invalid_parameters,
                    "block matrix " + std::to_string(i) + " is not symmetric");
            require(b.minCoeff() >= 0.0 && b.maxCoeff() <= 1.0, ErrorCode::invalid_parameters,
                    "block matrix " + std::to_string(i) + " has entries outside [0,1]");
        }
        sizes_ = std::move(sizes);
    }

    std::size_t n() const noexcept { return z_.size(); }
    std::size_t k() const noexcept { return k_; }
    std::size_t m() const noexcept { return blocks_.size(); }
    const std::vector<std::size_t>& z() const noexcept { return z_; }
    const std::vector<Matrix>& blocks() const noexcept { return blocks_; }
    const std::vector<std::size_t>& community_sizes() const noexcept { return sizes_; }

    /// Membership indicator matrix Z (n x K).
    Matrix membership_matrix() const {
        Matrix zm = Matrix::Zero(static_cast<Eigen::Index>(n()), static_cast<Eigen::Index>(k_));
        for (std::size_t u = 0; u < z_.size(); ++u)
            zm(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(z_[u])) = 1.0;
        return zm;
    }

private:
    std::vector<std::size_t> z_;
    std::vector<Matrix> blocks_;
    std::vector<std::size_t> sizes_;
    std::size_t k_ = 0;
};

/// Mixed-membership SBM: row-stochastic memberships (n x K) and one block matrix.
class MmsbmParams {
public:
    MmsbmParams() = default;

    MmsbmParams(Matrix memberships, Matrix block)
        : memberships_(std::move(memberships)), block_(std::move(block)) {
        require(block_.rows() == block_.cols() && block_.rows() == memberships_.cols(),
                ErrorCode::dimension_mismatch, "block matrix must be K x K with K membership columns");
        require(block_ == block_.transpose(), ErrorCode::invalid_parameters,
                "block matrix is not symmetric");
        require(block_.minCoeff() >= 0.0 && block_.maxCoeff() <= 1.0, ErrorCode::invalid_parameters,
                "block matrix has entries outside [0,1]");
        for (Eigen::Index u = 0; u < memberships_.rows(); ++u) {
            require(memberships_.row(u).minCoeff() >= 0.0, ErrorCode::invalid_parameters,
                    "negative membership in row " + std::to_string(u));
            require(std::abs(memberships_.row(u).sum() - 1.0) <= 1e-12, ErrorCode::invalid_parameters,
                    "membership row " + std::to_string(u) + " does not sum to 1");
        }
    }

    std::size_t n() const noexcept { return static_cast<std::size_t>(memberships_.rows()); }
    std::size_t k() const noexcept { return static_cast<std::size_t>(block_.rows()); }
    const Matrix& memberships() const noexcept { return memberships_; }
    const Matrix& block() const noexcept { return block_; }

private:
    Matrix memberships_;
    Matrix block_;
};

/// Slack allowed on probability entries before they count as invalid.
inline constexpr double probability_tolerance = 1e-8;

/// Symmetrizes, checks [0,1] up to `probability_tolerance`, clamps.
inline Graph make_probability_graph(Matrix p) {
    p = 0.5 * (p + p.transpose()).eval();
    const double lo = p.size() ? p.minCoeff() : 0.0;
    const double hi = p.size() ? p.maxCoeff() : 0.0;
    require(lo >= -probability_tolerance && hi <= 1.0 + probability_tolerance,
            ErrorCode::invalid_parameters,
            "probability entries outside [0,1] (range [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "])");
    return Graph(p.cwiseMax(0.0).cwiseMin(1.0), GraphKind::probability);
}

/// V = Z (Z^T Z)^{-1/2}, R_i = (Z^T Z)^{1/2} B_i (Z^T Z)^{1/2}; d = K.
inline CosieParams sbm_to_cosie(const MultilayerSbmParams& sbm) {
    const auto& sizes = sbm.community_sizes();
    const auto k = static_cast<Eigen::Index>(sbm.k());
    Vector root(k);
    for (Eigen::Index j = 0; j < k; ++j) root(j) = std::sqrt(static_cast<double>(sizes[static_cast<std::size_t>(j)]));

    Matrix basis = Matrix::Zero(static_cast<Eigen::Index>(sbm.n()), k);
    for (std::size_t u = 0; u < sbm.n(); ++u) {
        const auto c = static_cast<Eigen::Index>(sbm.z()[u]);
        basis(static_cast<Eigen::Index>(u), c) = 1.0 / root(c);
    }
    std::vector<Matrix> scores;
    scores.reserve(sbm.m());
    for (const auto& b : sbm.blocks()) {
        Matrix r = root.asDiagonal() * b * root.asDiagonal();
        scores.push_back(0.5 * (r + r.transpose()));
    }
    return CosieParams(std::move(basis), std::move(scores));
}

/// P_i = V R_i V^T as a probability graph (diagonal kept).
inline Graph probability_matrix(const CosieParams& params, std::size_t i) {
    require(i < params.m(), ErrorCode::invalid_argument,
            "graph index " + std::to_string(i) + " out of range (m=" + std::to_string(params.m()) + ")");
    return make_probability_graph(params.basis() * params.score(i) * params.basis().transpose());
}

/// Z B_i Z^T computed blockwise from labels (exact, no round-off from V).
inline Graph sbm_probability_matrix(const MultilayerSbmParams& sbm, std::size_t i) {
    require(i < sbm.m(), ErrorCode::invalid_argument, "graph index out of range");
    const auto n = static_cast<Eigen::Index>(sbm.n());
    const auto& b = sbm.blocks()[i];
    Matrix p(n, n);
    for (Eigen::Index v = 0; v < n; ++v)
        for (Eigen::Index u = 0; u < n; ++u)
            p(u, v) = b(static_cast<Eigen::Index>(sbm.z()[static_cast<std::size_t>(u)]),
                        static_cast<Eigen::Index>(sbm.z()[static_cast<std::size_t>(v)]));
    return Graph(std::move(p), GraphKind::probability);
}

inline Graph mmsbm_probability_matrix(const MmsbmParams& params) {
    const Matrix& z = params.memberships();
    return make_probability_graph(z * params.block() * z.transpose());
}

/// Expected adjacency of the hollow graph drawn from P: P with a zero diagonal.
inline Matrix expected_adjacency(const Graph& p) {
    Matrix e = p.entries();
    e.diagonal().setZero();
    return e;
}

/// Independent Bernoulli(P_uv) edges above the diagonal, mirrored; no loops.
/// Entries are drawn in column-major upper-triangle order.
inline Graph sample_graph(const Graph& p, Rng& rng) {
    require(p.kind() == GraphKind::probability, ErrorCode::invalid_argument,
            "sample_graph needs a probability matrix");
    const auto n = static_cast<Eigen::Index>(p.n());
    const Matrix& pm = p.entries();
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index v = 1; v < n; ++v) {
        for (Eigen::Index u = 0; u < v; ++u) {
            if (rng.bernoulli(pm(u, v))) {
                a(u, v) = 1.0;
                a(v, u) = 1.0;
            }
        }
    }
    return Graph(std::move(a), GraphKind::binary);
}

/// One graph per score matrix; graph i uses the derived stream rng.derive(i).
inline GraphCollection sample_collection(const CosieParams& params, const Rng& rng,
                                         std::size_t threads = 1) {
    auto graphs = parallel_map<Graph>(params.m(), threads, [&](std::size_t i) {
        Rng stream = rng.derive(i);
        return sample_graph(probability_matrix(params, i), stream);
    });
    return GraphCollection(std::move(graphs));
}

inline GraphCollection sample_collection(const MultilayerSbmParams& sbm, const Rng& rng,
                                         std::size_t threads = 1) {
    auto graphs = parallel_map<Graph>(sbm.m(), threads, [&](std::size_t i) {
        Rng stream = rng.derive(i);
        return sample_graph(sbm_probability_matrix(sbm, i), stream);
    });
    return GraphCollection(std::move(graphs));
}

/// n rows drawn i.i.d. from the symmetric Dirichlet(alpha) on K categories.
inline Matrix sample_mmsbm_membership(std::size_t n, std::size_t k, double alpha, Rng& rng) {
    require(alpha > 0.0 && std::isfinite(alpha), ErrorCode::invalid_argument,
            "Dirichlet concentration must be positive");
    require(k >= 1, ErrorCode::invalid_argument, "need K >= 1");
    const auto kk = static_cast<Eigen::Index>(k);
    Matrix z(static_cast<Eigen::Index>(n), kk);
    for (Eigen::Index u = 0; u < z.rows(); ++u) {
        if (k == 1) {
            z(u, 0) = 1.0;
            continue;
        }
        double total = 0.0;
        do {
            total = 0.0;
            for (Eigen::Index j = 0; j < kk; ++j) {
                z(u, j) = rng.gamma(alpha);
                total += z(u, j);
            }
        } while (!(total > 0.0));
        z.row(u) /= total;
    }
    return z;
}

/// Largest row sum of P (diagonal included).
inline double delta_max_degree(const Graph& p) {
    if (p.n() == 0) return 0.0;
    return p.entries().rowwise().sum().maxCoeff();
}

/// sqrt( (1/m) sum_i delta(P_i) / lambda_min(R_i)^2 ), lambda_min being the
/// smallest-magnitude eigenvalue of R_i.
inline double compute_epsilon(const CosieParams& params) {
    double total = 0.0;
    for (std::size_t i = 0; i < params.m(); ++i) {
        const Matrix& r = params.score(i);
        Eigen::SelfAdjointEigenSolver<Matrix> es(r, Eigen::EigenvaluesOnly);
        const Vector mags = es.eigenvalues().cwiseAbs();
        const double lam_min = mags.minCoeff();
        require(lam_min > 1e-12 * std::max(1.0, mags.maxCoeff()), ErrorCode::singular,
                "score matrix " + std::to_string(i) + " is singular");
        const Matrix p = params.basis() * r * params.basis().transpose();
        const double delta = p.rowwise().sum().maxCoeff();
        total += delta / (lam_min * lam_min);
    }
    return std::sqrt(total / static_cast<double>(params.m()));
}

// Persistence ---------------------------------------------------------------

/// Writes V.csv and R_1.csv ... R_m.csv into `dir` (created if missing).
inline void save_cosie_params(const std::filesystem::path& dir, const CosieParams& params) {
    std::filesystem::create_directories(dir);
    save_matrix(dir / "V.csv", params.basis());
    for (std::size_t i = 0; i < params.m(); ++i)
        save_matrix(dir / ("R_" + std::to_string(i + 1) + ".csv"), params.score(i));
}

inline CosieParams load_cosie_params(const std::filesystem::path& dir) {
    Matrix basis = load_matrix(dir / "V.csv");
    std::vector<Matrix> scores;
    for (std::size_t i = 1;; ++i) {
        const auto path = dir / ("R_" + std::to_string(i) + ".csv");
        if (!std::filesystem::exists(path)) break;
        scores.push_back(load_matrix(path));
    }
    return CosieParams(std::move(basis), std::move(scores));
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
    require(rows.is_array(), ErrorCode::parse, "matrix must be an array of rows");
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(r ? rows.at(0).size() : 0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto& row = rows.at(static_cast<std::size_t>(i));
        require(row.is_array() && static_cast<Eigen::Index>(row.size()) == c, ErrorCode::parse,
                "ragged matrix row " + std::to_string(i));
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
    return m;
}

/// `{"z": [0-based labels], "B": [K x K matrices]}`
inline nlohmann::json sbm_params_to_json(const MultilayerSbmParams& sbm) {
    nlohmann::json doc;
    doc["z"] = sbm.z();
    doc["B"] = nlohmann::json::array();
    for (const auto& b : sbm.blocks()) doc["B"].push_back(matrix_to_json(b));
    return doc;
}

inline MultilayerSbmParams sbm_params_from_json(const nlohmann::json& doc) {
    require(doc.is_object() && doc.contains("z") && doc.contains("B"), ErrorCode::parse,
            "SBM parameters need \"z\" and \"B\"");
    std::vector<std::size_t> z;
    try {
        z = doc["z"].get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, std::string("\"z\" must be an array of non-negative integers: ") + e.what());
    }
    std::vector<Matrix> blocks;
    for (const auto& b : doc["B"]) blocks.push_back(matrix_from_json(b));
    return MultilayerSbmParams(std::move(z), std::move(blocks));
}

inline MultilayerSbmParams load_sbm_params(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    try {
        return sbm_params_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::parse, path.string() + ": " + e.what());
    }
}

inline void save_sbm_params(const std::filesystem::path& path, const MultilayerSbmParams& sbm) {
    write_text(path, sbm_params_to_json(sbm).dump(2) + "\n");
}

} // namespace cosie
