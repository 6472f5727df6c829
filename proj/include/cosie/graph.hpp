#pragma once

#include "cosie/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cosie {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class GraphKind { binary, weighted, probability };

inline const char* to_string(GraphKind kind) noexcept {
    switch (kind) {
    case GraphKind::binary: return "binary";
    case GraphKind::weighted: return "weighted";
    case GraphKind::probability: return "probability";
    }
    return "unknown";
}

/// Checks the structural invariants of `kind` on a square matrix and throws a
/// ValidationError naming the first offending index pair.
inline void validate_graph_matrix(const Matrix& m, GraphKind kind) {
    if (m.rows() != m.cols())
        throw ValidationError("adjacency matrix must be square, got " + std::to_string(m.rows()) +
                              "x" + std::to_string(m.cols()));
    const auto n = static_cast<std::size_t>(m.rows());
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t u = 0; u < n; ++u) {
            const double x = m(u, v);
            if (!std::isfinite(x)) throw ValidationError("non-finite entry", {{u, v}});
            if (u < v && x != m(v, u)) throw ValidationError("asymmetric entry", {{u, v}});
            if (u == v && kind != GraphKind::probability && x != 0.0)
                throw ValidationError("non-zero diagonal (self-loop)", {{u, v}});
            if (kind == GraphKind::binary && x != 0.0 && x != 1.0)
                throw ValidationError("binary graph entry not in {0,1}", {{u, v}});
            if (kind == GraphKind::probability && (x < 0.0 || x > 1.0))
                throw ValidationError("probability entry outside [0,1]", {{u, v}});
        }
    }
}

/// One network on n vertices, stored densely. Immutable after construction.
class Graph {
public:
    Graph() = default;

    Graph(Matrix entries, GraphKind kind) : entries_(std::move(entries)), kind_(kind) {
        validate_graph_matrix(entries_, kind_);
    }

    static Graph empty(std::size_t n) {
        return Graph(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                     GraphKind::binary);
    }

    std::size_t n() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    GraphKind kind() const noexcept { return kind_; }
    const Matrix& entries() const noexcept { return entries_; }
    double operator()(std::size_t u, std::size_t v) const {
        return entries_(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
    }

    bool operator==(const Graph& other) const {
        return kind_ == other.kind_ && entries_.rows() == other.entries_.rows() &&
               entries_ == other.entries_;
    }

private:
    Matrix entries_;
    GraphKind kind_ = GraphKind::binary;
};

/// m vertex-aligned graphs with optional labels and names.
class GraphCollection {
public:
    GraphCollection() = default;

    explicit GraphCollection(std::vector<Graph> graphs,
                             std::optional<std::vector<std::string>> labels = std::nullopt,
                             std::optional<std::vector<std::string>> names = std::nullopt)
        : graphs_(std::move(graphs)), labels_(std::move(labels)), names_(std::move(names)) {
        for (std::size_t i = 1; i < graphs_.size(); ++i) {
            if (graphs_[i].n() != graphs_[0].n())
                fail(ErrorCode::dimension_mismatch,
                     "mismatched vertex counts: graph 0 has n=" + std::to_string(graphs_[0].n()) +
                         ", graph " + std::to_string(i) + " has n=" +
                         std::to_string(graphs_[i].n()));
        }
        if (labels_ && labels_->size() != graphs_.size())
            fail(ErrorCode::invalid_argument, "labels must have one entry per graph");
        if (names_ && names_->size() != graphs_.size())
            fail(ErrorCode::invalid_argument, "names must have one entry per graph");
    }

    std::size_t size() const noexcept { return graphs_.size(); }
    std::size_t n() const noexcept { return graphs_.empty() ? 0 : graphs_.front().n(); }
    const Graph& operator[](std::size_t i) const { return graphs_.at(i); }
    const std::vector<Graph>& graphs() const noexcept { return graphs_; }
    const std::optional<std::vector<std::string>>& labels() const noexcept { return labels_; }
    const std::optional<std::vector<std::string>>& names() const noexcept { return names_; }

    auto begin() const noexcept { return graphs_.begin(); }
    auto end() const noexcept { return graphs_.end(); }

private:
    std::vector<Graph> graphs_;
    std::optional<std::vector<std::string>> labels_;
    std::optional<std::vector<std::string>> names_;
};

} // namespace cosie
