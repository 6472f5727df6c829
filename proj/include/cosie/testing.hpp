#pragma once

#include "cosie/baselines.hpp"
#include "cosie/error.hpp"
#include "cosie/graph.hpp"
#include "cosie/inference.hpp"
#include "cosie/mase.hpp"
#include "cosie/models.hpp"
#include "cosie/parallel.hpp"
#include "cosie/random.hpp"
#include "cosie/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace cosie {

enum class TestMethod { bootstrap, asymptotic, exact_mc };

inline const char* to_string(TestMethod m) noexcept {
    switch (m) {
    case TestMethod::bootstrap: return "bootstrap";
    case TestMethod::asymptotic: return "asymptotic";
    case TestMethod::exact_mc: return "exact_mc";
    }
    return "unknown";
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    TestMethod method = TestMethod::bootstrap;
    std::size_t replicates = 0;
    std::size_t d_used = 0;
};

/// Settings shared by the two-sample tests. `reps` is the total number of
/// bootstrap or exact-null pairs (split evenly between the two sources);
/// `mc_reps` the number of Gaussian draws per source for the asymptotic null.
struct TestOptions {
    std::size_t d = 3;
    std::size_t graph_dim = 3;
    bool scaled = false;
    std::size_t reps = 1000;
    std::size_t mc_reps = 10000;
    std::size_t threads = 1;
};

/// ||R1 - R2||_F^2
inline double pairwise_statistic(const Matrix& r1, const Matrix& r2) {
    require(r1.rows() == r2.rows() && r1.cols() == r2.cols(), ErrorCode::dimension_mismatch,
            "score matrices differ in shape");
    return (r1 - r2).squaredNorm();
}

/// MASE fit on a pair of graphs followed by the squared Frobenius distance
/// between their score matrices.
inline MaseEmbedding fit_pair(const Graph& a1, const Graph& a2, const TestOptions& opts) {
    require(a1.n() == a2.n(), ErrorCode::dimension_mismatch, "graphs differ in vertex count");
    MaseOptions mo;
    mo.d = opts.d;
    mo.graph_dims = std::vector<std::size_t>{opts.graph_dim};
    mo.scaled = opts.scaled;
    return mase_fit(GraphCollection({a1, a2}), mo);
}

inline double pair_statistic(const Graph& a1, const Graph& a2, const TestOptions& opts) {
    const auto fit = fit_pair(a1, a2, opts);
    return pairwise_statistic(fit.scores[0], fit.scores[1]);
}

/// Add-one smoothed exceedance proportion (1 + #{null >= observed}) / (N + 1).
inline double exceedance_p_value(const std::vector<double>& null, double observed) {
    const auto hits = std::count_if(null.begin(), null.end(), [&](double t) { return t >= observed; });
    return (1.0 + static_cast<double>(hits)) / (static_cast<double>(null.size()) + 1.0);
}

/// Null distribution of the pair statistic: the first reps/2 pairs are both
/// drawn from `p1`, the rest from `p2`. Pair r uses rng.derive(r).
inline std::vector<double> pair_null_distribution(const Graph& p1, const Graph& p2,
                                                  const TestOptions& opts, const Rng& rng) {
    require(opts.reps >= 2 && opts.reps % 2 == 0, ErrorCode::invalid_argument,
            "replicate count must be even and >= 2");
    const std::size_t half = opts.reps / 2;
    return parallel_map<double>(opts.reps, opts.threads, [&](std::size_t r) {
        const Graph& source = r < half ? p1 : p2;
        Rng stream = rng.derive(r);
        Rng s1 = stream.derive(0), s2 = stream.derive(1);
        const Graph b1 = sample_graph(source, s1);
        const Graph b2 = sample_graph(source, s2);
        return pair_statistic(b1, b2, opts);
    });
}

/// Low-rank plug-in estimate of P from one graph: the rank-d_i eigen
/// reconstruction (scaled ASE with signs kept) clipped to [0, 1].
inline Graph plugin_probability(const Graph& a, std::size_t dim) {
    const auto eig = top_eigs(a.entries(), dim);
    Matrix p = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    p = 0.5 * (p + p.transpose()).eval();
    return Graph(p.cwiseMax(0.0).cwiseMin(1.0), GraphKind::probability);
}

/// Semiparametric bootstrap test of H0: R1 = R2.
inline TestResult bootstrap_test(const Graph& a1, const Graph& a2, const TestOptions& opts,
                                 const Rng& rng) {
    TestResult res;
    res.method = TestMethod::bootstrap;
    res.d_used = opts.d;
    res.replicates = opts.reps;
    res.statistic = pair_statistic(a1, a2, opts);
    const Graph p1 = plugin_probability(a1, opts.graph_dim);
    const Graph p2 = plugin_probability(a2, opts.graph_dim);
    res.p_value = exceedance_p_value(pair_null_distribution(p1, p2, opts, rng), res.statistic);
    return res;
}

/// Same resampling scheme as the bootstrap, but from the true probability
/// matrices; the simulation oracle for power curves.
inline TestResult exact_mc_test(const Graph& a1, const Graph& a2, const Graph& p1, const Graph& p2,
                                const TestOptions& opts, const Rng& rng) {
    TestResult res;
    res.method = TestMethod::exact_mc;
    res.d_used = opts.d;
    res.replicates = opts.reps;
    res.statistic = pair_statistic(a1, a2, opts);
    res.p_value = exceedance_p_value(pair_null_distribution(p1, p2, opts, rng), res.statistic);
    return res;
}

namespace detail {

/// Symmetric square root of a PSD matrix (negative eigenvalues clamped).
inline Matrix psd_sqrt(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

/// sum_k y_kk^2 + 2 sum_{k<l} y_kl^2 for y in upper-triangle vec layout,
/// i.e. the squared Frobenius norm of the symmetric matrix y encodes.
inline double frobenius_from_vec(const Vector& y, std::size_t d) {
    double t = 0.0;
    for (std::size_t l = 0; l < d; ++l)
        for (std::size_t k = 0; k <= l; ++k) {
            const double v = y(static_cast<Eigen::Index>(vec_index(k, l)));
            t += (k == l ? 1.0 : 2.0) * v * v;
        }
    return t;
}

} // namespace detail

/// Null draws of the squared-Frobenius statistic under y ~ N(0, 2 Sigma).
inline std::vector<double> gaussian_null_draws(const ScoreCovariance& cov, std::size_t count, Rng rng) {
    const Matrix root = detail::psd_sqrt(2.0 * cov.sigma);
    const auto r = root.rows();
    std::vector<double> out(count);
    Vector z(r);
    for (std::size_t i = 0; i < count; ++i) {
        for (Eigen::Index a = 0; a < r; ++a) z(a) = rng.normal();
        out[i] = detail::frobenius_from_vec(root * z, cov.d);
    }
    return out;
}

/// Test of H0: R1 = R2 against the Gaussian (generalized chi-square) null,
/// bias term neglected. Sigma is estimated by plugging Vhat and the clipped
/// Phat_k into the covariance formula; the p-value pools mc_reps draws from
/// each of the two plug-in nulls.
inline TestResult asymptotic_test(const Graph& a1, const Graph& a2, const TestOptions& opts,
                                  const Rng& rng) {
    require(opts.mc_reps >= 1, ErrorCode::invalid_argument, "mc_reps must be >= 1");
    TestResult res;
    res.method = TestMethod::asymptotic;
    res.d_used = opts.d;
    res.replicates = 2 * opts.mc_reps;
    const auto fit = fit_pair(a1, a2, opts);
    res.statistic = pairwise_statistic(fit.scores[0], fit.scores[1]);

    std::vector<ScoreCovariance> covs;
    double total_trace = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        covs.push_back(score_covariance(fit.basis, reconstruct_p(fit, k, true)));
        total_trace += covs.back().sigma.trace();
    }
    if (total_trace <= 1e-14 && res.statistic == 0.0)
        fail(ErrorCode::degenerate_covariance,
             "estimated score covariance vanishes and the statistic is 0");

    std::vector<double> null;
    null.reserve(res.replicates);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto draws = gaussian_null_draws(covs[k], opts.mc_reps, rng.derive(k));
        null.insert(null.end(), draws.begin(), draws.end());
    }
    res.p_value = exceedance_p_value(null, res.statistic);
    return res;
}

/// ||X1 - X2||_F^2 between the two omnibus latent-position blocks.
inline double omni_statistic(const Graph& a1, const Graph& a2, std::size_t d) {
    const auto omni = omni_embed(GraphCollection({a1, a2}), d);
    return (omni.positions[0] - omni.positions[1]).squaredNorm();
}

/// All-pairs p-values: symmetric, unit diagonal. Pair (i, j), i < j, uses the
/// stream rng.derive(i * m + j).
inline Matrix pairwise_test_matrix(const GraphCollection& graphs, TestMethod method,
                                   const TestOptions& opts, const Rng& rng) {
    const std::size_t m = graphs.size();
    require(m >= 2, ErrorCode::invalid_argument, "need at least two graphs");
    require(method != TestMethod::exact_mc, ErrorCode::invalid_argument,
            "exact_mc needs the true probability matrices");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);

    TestOptions inner = opts;
    inner.threads = 1;
    const auto pvals = parallel_map<double>(pairs.size(), opts.threads, [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        const Rng stream = rng.derive(i * m + j);
        return method == TestMethod::bootstrap
                   ? bootstrap_test(graphs[i], graphs[j], inner, stream).p_value
                   : asymptotic_test(graphs[i], graphs[j], inner, stream).p_value;
    });
    Matrix out = Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pvals[k];
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = pvals[k];
    }
    return out;
}

} // namespace cosie
