#pragma once

// Simulation runner. Each scenario reads a JSON config (unknown keys are
// rejected), expands a grid, and runs replicates as a parallel map where
// replicate (point p, rep r) draws only from Rng(seed).derive({1, p, r}).
// Reports are assembled in (point, rep) order, so output bytes do not
// depend on the thread count.

#include "cosie/analysis.hpp"
#include "cosie/baselines.hpp"
#include "cosie/error.hpp"
#include "cosie/graph.hpp"
#include "cosie/inference.hpp"
#include "cosie/io.hpp"
#include "cosie/mase.hpp"
#include "cosie/models.hpp"
#include "cosie/parallel.hpp"
#include "cosie/random.hpp"
#include "cosie/spectral.hpp"
#include "cosie/testing.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace cosie {

struct ReportRow {
    std::vector<double> point;
    std::size_t rep = 0;
    std::string method;
    std::string metric;
    double value = 0.0;
};

struct SummaryRow {
    std::vector<double> point;
    std::string method;
    std::string metric;
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t count = 0;
};

struct ExperimentReport {
    std::string scenario;
    std::vector<std::string> keys;  // grid column names
    std::vector<ReportRow> rows;
    nlohmann::json config;          // resolved config, defaults filled in

    std::vector<SummaryRow> summary() const {
        std::vector<SummaryRow> out;
        std::map<std::tuple<std::vector<double>, std::string, std::string>, std::size_t> index;
        std::vector<std::vector<double>> values;
        for (const auto& r : rows) {
            auto key = std::make_tuple(r.point, r.method, r.metric);
            auto it = index.find(key);
            if (it == index.end()) {
                it = index.emplace(key, out.size()).first;
                out.push_back({r.point, r.method, r.metric, 0.0, 0.0, 0});
                values.emplace_back();
            }
            values[it->second].push_back(r.value);
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& v = values[i];
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            out[i].mean = mean;
            out[i].count = v.size();
            out[i].stderr_ = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) /
                                                std::sqrt(static_cast<double>(v.size()))
                                          : 0.0;
        }
        return out;
    }

    /// Mean of one (point, method, metric) cell; throws if absent.
    double mean(const std::vector<double>& point, const std::string& method, const std::string& metric) const {
        for (const auto& s : summary())
            if (s.point == point && s.method == method && s.metric == metric) return s.mean;
        fail(ErrorCode::invalid_argument, "no summary cell for " + method + "/" + metric);
    }

    std::string raw_csv() const {
        std::ostringstream os;
        for (const auto& k : keys) os << k << ',';
        os << "rep,method,metric,value\n";
        for (const auto& r : rows) {
            for (double x : r.point) os << detail::format_double(x) << ',';
            os << r.rep << ',' << r.method << ',' << r.metric << ',' << detail::format_double(r.value) << '\n';
        }
        return os.str();
    }

    std::string summary_csv() const {
        std::ostringstream os;
        for (const auto& k : keys) os << k << ',';
        os << "method,metric,mean,stderr,count\n";
        for (const auto& s : summary()) {
            for (double x : s.point) os << detail::format_double(x) << ',';
            os << s.method << ',' << s.metric << ',' << detail::format_double(s.mean) << ','
               << detail::format_double(s.stderr_) << ',' << s.count << '\n';
        }
        return os.str();
    }
};

namespace detail {

class Config {
public:
    Config(const nlohmann::json& raw, std::set<std::string> allowed) : raw_(raw) {
        require(raw_.is_object(), ErrorCode::parse, "experiment config must be a JSON object");
        allowed.insert("scenario");
        for (const auto& [k, v] : raw_.items()) {
            (void)v;
            require(allowed.count(k) > 0, ErrorCode::invalid_argument, "unknown config key '" + k + "'");
        }
        if (raw_.contains("scenario")) resolved_["scenario"] = raw_["scenario"];
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        T value = fallback;
        if (raw_.contains(key)) {
            try {
                value = raw_.at(key).get<T>();
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorCode::parse, "config key '" + key + "': " + e.what());
            }
        }
        resolved_[key] = value;
        return value;
    }

    Matrix matrix(const std::string& key, const Matrix& fallback) {
        Matrix value = raw_.contains(key) ? matrix_from_json(raw_.at(key)) : fallback;
        resolved_[key] = matrix_to_json(value);
        return value;
    }

    std::vector<Matrix> matrices(const std::string& key, const std::vector<Matrix>& fallback) {
        std::vector<Matrix> value;
        if (raw_.contains(key)) {
            require(raw_.at(key).is_array(), ErrorCode::parse, "config key '" + key + "' must be a list of matrices");
            for (const auto& m : raw_.at(key)) value.push_back(matrix_from_json(m));
        } else {
            value = fallback;
        }
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : value) arr.push_back(matrix_to_json(m));
        resolved_[key] = arr;
        return value;
    }

    const nlohmann::json& resolved() const noexcept { return resolved_; }

private:
    const nlohmann::json& raw_;
    nlohmann::json resolved_ = nlohmann::json::object();
};

/// Balanced contiguous communities: vertex u in block floor(u K / n).
inline std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t k) {
    std::vector<std::size_t> z(n);
    for (std::size_t u = 0; u < n; ++u) z[u] = u * k / n;
    return z;
}

inline Matrix two_block(double diag, double off) {
    Matrix b(2, 2);
    b << diag, off, off, diag;
    return b;
}

inline Matrix strong_two_block() { return 0.3 * Matrix::Identity(2, 2) + 0.1 * Matrix::Ones(2, 2); }

inline Matrix fixed_three_block() {
    Matrix b(3, 3);
    b << 0.4, 0.1, 0.1, 0.1, 0.4, 0.2, 0.1, 0.2, 0.3;
    return b;
}

inline std::vector<Matrix> default_class_offsets() {
    Matrix c1 = 0.1 * Matrix::Identity(2, 2);
    Matrix c3 = Matrix::Zero(2, 2), c4 = Matrix::Zero(2, 2);
    c3(0, 0) = 0.1;
    c4(1, 1) = 0.1;
    return {c1, -c1, c3, c4};
}

inline void require_positive(std::size_t v, const std::string& key) {
    require(v >= 1, ErrorCode::invalid_argument, "config key '" + key + "' must be >= 1");
}

inline void require_nonempty(const std::vector<double>& grid, const std::string& key) {
    require(!grid.empty(), ErrorCode::invalid_argument, "config key '" + key + "' must be a non-empty list");
}

inline std::size_t as_count(double x, const std::string& key) {
    require(x >= 0.0 && std::floor(x) == x, ErrorCode::invalid_argument,
            "config key '" + key + "' must hold non-negative integers");
    return static_cast<std::size_t>(x);
}

struct Job {
    std::size_t point = 0;
    std::size_t rep = 0;
};

struct Measurement {
    std::string method;
    std::string metric;
    double value = 0.0;
};

/// Runs fn(point, rep, rng) for every (point, rep) and collects rows in order.
inline void run_grid(ExperimentReport& report, const std::vector<std::vector<double>>& points,
                     std::size_t reps, std::uint64_t seed, std::size_t threads,
                     const std::function<std::vector<Measurement>(std::size_t, std::size_t, Rng)>& fn) {
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < points.size(); ++p)
        for (std::size_t r = 0; r < reps; ++r) jobs.push_back({p, r});
    const Rng root(seed);
    const auto results = parallel_map<std::vector<Measurement>>(jobs.size(), threads, [&](std::size_t j) {
        return fn(jobs[j].point, jobs[j].rep, root.derive({1, jobs[j].point, jobs[j].rep}));
    });
    for (std::size_t j = 0; j < jobs.size(); ++j)
        for (const auto& m : results[j])
            report.rows.push_back({points[jobs[j].point], jobs[j].rep, m.method, m.metric, m.value});
}

inline MaseEmbedding fit_fixed(const GraphCollection& graphs, std::size_t d, std::size_t di, bool scaled) {
    MaseOptions mo;
    mo.d = d;
    mo.graph_dims = std::vector<std::size_t>{di};
    mo.scaled = scaled;
    return mase_fit(graphs, mo);
}

inline bool has(const std::vector<std::string>& xs, const std::string& x) {
    return std::find(xs.begin(), xs.end(), x) != xs.end();
}

inline void check_methods(const std::vector<std::string>& methods, const std::vector<std::string>& known) {
    require(!methods.empty(), ErrorCode::invalid_argument, "config key 'methods' must be non-empty");
    for (const auto& m : methods)
        require(has(known, m), ErrorCode::invalid_argument, "unknown method '" + m + "'");
}

// Scenarios -----------------------------------------------------------------

/// Subspace estimation error against the number of graphs, for a
/// homogeneous (fixed B) or heterogeneous (B entries ~ U(0,1)) multilayer SBM.
inline ExperimentReport subspace_error(const nlohmann::json& raw, std::uint64_t seed, std::size_t threads) {
    Config cfg(raw, {"n", "design", "B", "K", "m_grid", "reps", "methods"});
    ExperimentReport rep;
    rep.scenario = "subspace_error";
    rep.keys = {"m"};
    const auto n = cfg.get<std::size_t>("n", 729);
    const auto design = cfg.get<std::string>("design", "fixed");
    require(design == "fixed" || design == "random", ErrorCode::invalid_argument,
            "design must be 'fixed' or 'random'");
    Matrix b_fixed;
    std::size_t k = 0;
    if (design == "fixed") {
        b_fixed = cfg.matrix("B", fixed_three_block());
        k = static_cast<std::size_t>(b_fixed.rows());
    } else {
        k = cfg.get<std::size_t>("K", 3);
    }
    require_positive(k, "K");
    const auto m_grid = cfg.get<std::vector<double>>("m_grid", {2, 4, 8, 16, 32});
    require_nonempty(m_grid, "m_grid");
    const auto reps = cfg.get<std::size_t>("reps", design == "fixed" ? 25 : 100);
    require_positive(reps, "reps");
    const auto methods = cfg.get<std::vector<std::string>>("methods", {"mase_unscaled", "mase_scaled", "mean_ase"});
    check_methods(methods, {"mase_unscaled", "mase_scaled", "mean_ase"});
    rep.config = cfg.resolved();

    const auto z = balanced_labels(n, k);
    std::vector<std::vector<double>> points;
    for (double m : m_grid) {
        require_positive(as_count(m, "m_grid"), "m_grid");
        points.push_back({m});
    }
    run_grid(rep, points, reps, seed, threads, [&](std::size_t p, std::size_t, Rng rng) {
        const auto m = static_cast<std::size_t>(points[p][0]);
        std::vector<Matrix> blocks;
        Rng brng = rng.derive(0);
        for (std::size_t i = 0; i < m; ++i) {
            if (design == "fixed") {
                blocks.push_back(b_fixed);
                continue;
            }
            Matrix b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            for (Eigen::Index v = 0; v < b.cols(); ++v)
                for (Eigen::Index u = 0; u <= v; ++u) b(u, v) = b(v, u) = brng.uniform();
            blocks.push_back(b);
        }
        const MultilayerSbmParams sbm(z, blocks);
        const Matrix v = sbm_to_cosie(sbm).basis();
        const auto graphs = sample_collection(sbm, rng.derive(1));
        std::vector<Measurement> out;
        auto record = [&](const std::string& method, const Matrix& vhat) {
            out.push_back({method, "spectral", projection_distance(vhat, v, SubspaceNorm::spectral)});
            out.push_back({method, "frobenius", projection_distance(vhat, v, SubspaceNorm::frobenius)});
        };
        for (const auto& method : methods) {
            if (method == "mean_ase") record(method, mean_ase(graphs, k));
            else record(method, fit_fixed(graphs, k, k, method == "mase_scaled").basis);
        }
        return out;
    });
    return rep;
}

/// Error of the eigenvalues of Rhat_1 as estimates of the nonzero
/// eigenvalues of the first graph's expected adjacency. The hollow
/// expectation (P with zero diagonal) is the reference in "bias_j"; the
/// eigenvalues of P itself are reported as "bias_p_j".
inline ExperimentReport eigenvalue_bias(const nlohmann::json& raw, std::uint64_t seed, std::size_t threads) {
    Config cfg(raw, {"n_grid", "m_grid", "B", "reps", "scaled"});
    ExperimentReport rep;
    rep.scenario = "eigenvalue_bias";
    rep.keys = {"n", "m"};
    const auto n_grid = cfg.get<std::vector<double>>("n_grid", {300});
    const auto m_grid = cfg.get<std::vector<double>>("m_grid", {1, 2, 4, 8, 16, 32, 64});
    require_nonempty(n_grid, "n_grid");
    require_nonempty(m_grid, "m_grid");
    const Matrix b = cfg.matrix("B", strong_two_block());
    const auto reps = cfg.get<std::size_t>("reps", 100);
    require_positive(reps, "reps");
    const bool scaled = cfg.get<bool>("scaled", false);
    rep.config = cfg.resolved();
    const auto k = static_cast<std::size_t>(b.rows());

    std::vector<std::vector<double>> points;
    for (double n : n_grid)
        for (double m : m_grid) {
            require_positive(as_count(n, "n_grid"), "n_grid");
            require_positive(as_count(m, "m_grid"), "m_grid");
            points.push_back({n, m});
        }
    struct Truth {
        Vector hollow, full;
    };
    std::map<std::size_t, Truth> truth;
    for (double nd : n_grid) {
        const auto n = static_cast<std::size_t>(nd);
        if (truth.count(n)) continue;
        const MultilayerSbmParams one(balanced_labels(n, k), {b});
        const Graph p = sbm_probability_matrix(one, 0);
        truth[n] = {top_eigs(expected_adjacency(p), k).values, top_eigs(p.entries(), k).values};
    }

    run_grid(rep, points, reps, seed, threads, [&](std::size_t p, std::size_t, Rng rng) {
        const auto n = static_cast<std::size_t>(points[p][0]);
        const auto m = static_cast<std::size_t>(points[p][1]);
        const MultilayerSbmParams sbm(balanced_labels(n, k), std::vector<Matrix>(m, b));
        const auto graphs = sample_collection(sbm, rng);
        const auto fit = fit_fixed(graphs, k, k, scaled);
        const Vector est = estimate_eigenvalues(fit.scores[0]);
        const auto& t = truth.at(n);
        std::vector<Measurement> out;
        for (std::size_t j = 0; j < k; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            out.push_back({"mase", "bias_" + std::to_string(j + 1), est(jj) - t.hollow(jj)});
            out.push_back({"mase", "bias_p_" + std::to_string(j + 1), est(jj) - t.full(jj)});
        }
        return out;
    });
    return rep;
}

/// Four-class two-block design: B = 0.25 11^T + alpha C_class.
struct ClassDesign {
    std::size_t n = 256;
    std::size_t per_class = 10;
    std::vector<Matrix> offsets;
    double base = 0.25;

    std::vector<std::size_t> classes(std::size_t copies) const {
        std::vector<std::size_t> y;
        for (std::size_t c = 0; c < copies; ++c)
            for (std::size_t k = 0; k < offsets.size(); ++k)
                for (std::size_t i = 0; i < per_class; ++i) y.push_back(k);
        return y;
    }

    MultilayerSbmParams sbm(const std::vector<std::size_t>& y, double alpha) const {
        std::vector<Matrix> blocks;
        for (auto k : y) {
            const auto& c = offsets.at(k);
            blocks.push_back(base * Matrix::Ones(c.rows(), c.cols()) + alpha * c);
        }
        return MultilayerSbmParams(balanced_labels(n, static_cast<std::size_t>(offsets.front().rows())), blocks);
    }
};

inline ClassDesign read_class_design(Config& cfg) {
    ClassDesign design;
    design.n = cfg.get<std::size_t>("n", 256);
    design.per_class = cfg.get<std::size_t>("m_per_class", 10);
    require_positive(design.per_class, "m_per_class");
    design.offsets = cfg.matrices("C", default_class_offsets());
    require(!design.offsets.empty(), ErrorCode::invalid_argument, "config key 'C' must be non-empty");
    design.base = cfg.get<double>("base", 0.25);
    return design;
}

/// Joint (train + test) embedding, then 1-NN from each test graph to the
/// training graphs under the Frobenius distance of per-graph representations.
inline ExperimentReport classification(const nlohmann::json& raw, std::uint64_t seed, std::size_t threads) {
    Config cfg(raw, {"n", "m_per_class", "C", "base", "alpha_grid", "reps", "d", "methods", "scaled"});
    ExperimentReport rep;
    rep.scenario = "classification";
    rep.keys = {"alpha"};
    const auto design = read_class_design(cfg);
    const auto alpha_grid = cfg.get<std::vector<double>>("alpha_grid", {0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5});
    require_nonempty(alpha_grid, "alpha_grid");
    const auto reps = cfg.get<std::size_t>("reps", 50);
    require_positive(reps, "reps");
    const auto d = cfg.get<std::size_t>("d", 2);
    const auto methods = cfg.get<std::vector<std::string>>("methods", {"mase", "omni"});
    check_methods(methods, {"mase", "omni"});
    const bool scaled = cfg.get<bool>("scaled", false);
    rep.config = cfg.resolved();

    const auto y = design.classes(2);  // first half train, second half test
    const std::size_t half = y.size() / 2;
    std::vector<std::string> labels;
    for (auto k : y) labels.push_back(std::to_string(k + 1));
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) (i < half ? train : test).push_back(i);

    std::vector<std::vector<double>> points;
    for (double a : alpha_grid) points.push_back({a});
    run_grid(rep, points, reps, seed, threads, [&](std::size_t p, std::size_t, Rng rng) {
        const auto graphs = sample_collection(design.sbm(y, points[p][0]), rng);
        std::vector<Measurement> out;
        auto accuracy = [&](const std::vector<Matrix>& reps_) {
            const auto pred = nearest_neighbor_predict(distance_matrix(reps_), train, labels, test);
            std::size_t ok = 0;
            for (std::size_t i = 0; i < test.size(); ++i) ok += pred[i] == labels[test[i]];
            return static_cast<double>(ok) / static_cast<double>(test.size());
        };
        for (const auto& method : methods) {
            if (method == "mase") out.push_back({method, "accuracy", accuracy(fit_fixed(graphs, d, d, scaled).scores)});
            else out.push_back({method, "accuracy", accuracy(omni_embed(graphs, d).positions)});
        }
        return out;
    });
    return rep;
}

/// Average normalized error ||Phat_i - P_i||_F / ||P_i||_F over the graphs.
inline ExperimentReport model_error(const nlohmann::json& raw, std::uint64_t seed, std::size_t threads) {
    Config cfg(raw, {"n", "m_per_class", "C", "base", "alpha_grid", "reps", "d", "methods", "scaled"});
    ExperimentReport rep;
    rep.scenario = "model_error";
    rep.keys = {"alpha"};
    const auto design = read_class_design(cfg);
    const auto alpha_grid = cfg.get<std::vector<double>>("alpha_grid", {0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5});
    require_nonempty(alpha_grid, "alpha_grid");
    const auto reps = cfg.get<std::size_t>("reps", 50);
    require_positive(reps, "reps");
    const auto d = cfg.get<std::size_t>("d", 2);
    const auto methods = cfg.get<std::vector<std::string>>("methods", {"mase", "omni"});
    check_methods(methods, {"mase", "omni"});
    const bool scaled = cfg.get<bool>("scaled", false);
    rep.config = cfg.resolved();

    const auto y = design.classes(1);
    std::vector<std::vector<double>> points;
    for (double a : alpha_grid) points.push_back({a});
    run_grid(rep, points, reps, seed, threads, [&](std::size_t p, std::size_t, Rng rng) {
        const auto sbm = design.sbm(y, points[p][0]);
        const auto graphs = sample_collection(sbm, rng);
        std::vector<Measurement> out;
        for (const auto& method : methods) {
            double total = 0.0;
            if (method == "mase") {
                const auto fit = fit_fixed(graphs, d, d, scaled);
                for (std::size_t i = 0; i < graphs.size(); ++i) {
                    const Matrix truth = sbm_probability_matrix(sbm, i).entries();
                    total += (reconstruct_p(fit, i, false) - truth).norm() / truth.norm();
                }
            } else {
                const auto omni = omni_embed(graphs, d);
                for (std::size_t i = 0; i < graphs.size(); ++i) {
                    const Matrix truth = sbm_probability_matrix(sbm, i).entries();
                    const Matrix& x = omni.positions[i];
                    total += (x * x.transpose() - truth).norm() / truth.norm();
                }
            }
            out.push_back({method, "nmse", total / static_cast<double>(graphs.size())});
        }
        return out;
    });
    return rep;
}

/// K-means on the joint vertex representation against the planted
/// communities. design "fixed": every graph shares B, grid over m;
/// design "classes": the four-class design, grid over alpha.
inline ExperimentReport community_detection(const nlohmann::json& raw, std::uint64_t seed, std::size_t threads) {
    Config cfg(raw, {"design", "n", "B", "m_grid", "m_per_class", "C", "base", "alpha_grid", "reps", "methods",
                     "scaled", "restarts"});
    ExperimentReport rep;
    rep.scenario = "community_detection";
    const auto design_name = cfg.get<std::string>("design", "fixed");
    require(design_name == "fixed" || design_name == "classes", ErrorCode::invalid_argument,
            "design must be 'fixed' or 'classes'");
    const bool fixed = design_name == "fixed";
    ClassDesign classes;
    Matrix b;
    std::vector<double> grid;
    std::size_t n = 0;
    if (fixed) {
        n = cfg.get<std::size_t>("n", 256);
        b = cfg.matrix("B", strong_two_block());
        grid = cfg.get<std::vector<double>>("m_grid", {1, 2, 4, 8, 16});
        rep.keys = {"m"};
    } else {
        classes = read_class_design(cfg);
        n = classes.n;
        grid = cfg.get<std::vector<double>>("alpha_grid", {0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5});
        rep.keys = {"alpha"};
    }
    require_nonempty(grid, fixed ? "m_grid" : "alpha_grid");
    const auto reps = cfg.get<std::size_t>("reps", 50);
    require_positive(reps, "reps");
    const auto methods = cfg.get<std::vector<std::string>>("methods", {"mase", "mean_ase"});
    check_methods(methods, {"mase", "mean_ase", "omni"});
    const bool scaled = cfg.get<bool>("scaled", false);
    const auto restarts = cfg.get<std::size_t>("restarts", 10);
    rep.config = cfg.resolved();
    const std::size_t k = fixed ? static_cast<std::size_t>(b.rows())
                                : static_cast<std::size_t>(classes.offsets.front().rows());
    const auto z = balanced_labels(n, k);

    std::vector<std::vector<double>> points;
    for (double g : grid) {
        if (fixed) require_positive(as_count(g, "m_grid"), "m_grid");
        points.push_back({g});
    }
    run_grid(rep, points, reps, seed, threads, [&](std::size_t p, std::size_t, Rng rng) {
        const auto sbm = fixed ? MultilayerSbmParams(z, std::vector<Matrix>(static_cast<std::size_t>(points[p][0]), b))
                               : classes.sbm(classes.classes(1), points[p][0]);
        const auto graphs = sample_collection(sbm, rng.derive(0));
        KMeansOptions ko;
        ko.restarts = restarts;
        ko.seed = rng.derive(1).key();
        std::vector<Measurement> out;
        for (const auto& method : methods) {
            Matrix x;
            if (method == "mase") {
                x = fit_fixed(graphs, k, k, scaled).basis;
            } else if (method == "mean_ase") {
                x = mean_ase(graphs, k);
            } else {
                const auto omni = omni_embed(graphs, k);
                x = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
                for (const auto& pos : omni.positions) x += pos;
                x /= static_cast<double>(graphs.size());
            }
            const auto cl = kmeans_cluster(x, k, ko);
            const auto miss = misclustering_count(cl.assignment, z, k);
            out.push_back({method, "misclustered", static_cast<double>(miss)});
            out.push_back({method, "error_rate", static_cast<double>(miss) / static_cast<double>(n)});
        }
        return out;
    });
    return rep;
}

/// Power of the two-graph tests on mixed-membership SBMs.
///  setting 1: Z1 = Z2, B2 = B1 + delta e1 e1^T; grid over delta.
///  setting 2: B2 = B1, the first t membership rows of Z2 redrawn; grid over t.
/// Memberships are drawn once per grid point. Methods: "bootstrap",
/// "asymptotic", "exact" (MASE statistic against its null simulated from
/// the true P), "omni_exact" (OMNI statistic, same construction).
inline ExperimentReport testing_power(const nlohmann::json& raw, std::uint64_t seed, std::size_t threads) {
    Config cfg(raw, {"setting", "n", "grid", "B", "dirichlet", "trials", "bootstrap_reps", "mc_reps", "exact_reps",
                     "d", "graph_dim", "omni_d", "level", "methods"});
    ExperimentReport rep;
    rep.scenario = "testing_power";
    const auto setting = cfg.get<int>("setting", 1);
    require(setting == 1 || setting == 2, ErrorCode::invalid_argument, "setting must be 1 or 2");
    rep.keys = {setting == 1 ? "delta" : "t"};
    const auto n = cfg.get<std::size_t>("n", 300);
    const auto grid = cfg.get<std::vector<double>>(
        "grid", setting == 1 ? std::vector<double>{0, 0.02, 0.04, 0.06, 0.08} : std::vector<double>{0, 10, 20, 40, 80});
    require_nonempty(grid, "grid");
    const Matrix b1 = cfg.matrix("B", 0.3 * Matrix::Identity(3, 3) + 0.1 * Matrix::Ones(3, 3));
    const auto k = static_cast<std::size_t>(b1.rows());
    const auto dirichlet = cfg.get<double>("dirichlet", 0.1);
    const auto trials = cfg.get<std::size_t>("trials", 100);
    require_positive(trials, "trials");
    TestOptions opts;
    opts.graph_dim = cfg.get<std::size_t>("graph_dim", k);
    opts.d = cfg.get<std::size_t>("d", setting == 1 ? k : 5);
    opts.reps = cfg.get<std::size_t>("bootstrap_reps", 200);
    opts.mc_reps = cfg.get<std::size_t>("mc_reps", 2000);
    const auto exact_reps = cfg.get<std::size_t>("exact_reps", 1000);
    const auto omni_d = cfg.get<std::size_t>("omni_d", opts.graph_dim);
    const auto level = cfg.get<double>("level", 0.05);
    const auto methods =
        cfg.get<std::vector<std::string>>("methods", {"bootstrap", "asymptotic", "exact", "omni_exact"});
    check_methods(methods, {"bootstrap", "asymptotic", "exact", "omni_exact"});
    rep.config = cfg.resolved();

    const Rng root(seed);
    Rng zrng = root.derive(0);
    const Matrix z1 = sample_mmsbm_membership(n, k, dirichlet, zrng);
    const Graph p1 = mmsbm_probability_matrix(MmsbmParams(z1, b1));

    std::vector<std::vector<double>> points;
    std::vector<Graph> p2s;
    for (std::size_t pi = 0; pi < grid.size(); ++pi) {
        points.push_back({grid[pi]});
        if (setting == 1) {
            Matrix b2 = b1;
            b2(0, 0) += grid[pi];
            p2s.push_back(mmsbm_probability_matrix(MmsbmParams(z1, b2)));
        } else {
            const auto t = as_count(grid[pi], "grid");
            require(t <= n, ErrorCode::invalid_argument, "t exceeds n");
            Rng trng = root.derive({2, pi});
            Matrix z2 = z1;
            if (t > 0) z2.topRows(static_cast<Eigen::Index>(t)) = sample_mmsbm_membership(t, k, dirichlet, trng);
            p2s.push_back(mmsbm_probability_matrix(MmsbmParams(z2, b1)));
        }
    }

    // Simulated nulls from the true P1, P2: half the pairs from each.
    const bool want_exact = has(methods, "exact"), want_omni = has(methods, "omni_exact");
    std::vector<std::vector<double>> null_mase(points.size()), null_omni(points.size());
    if (want_exact || want_omni) {
        require(exact_reps >= 2 && exact_reps % 2 == 0, ErrorCode::invalid_argument,
                "exact_reps must be even and >= 2");
        const std::size_t per_point = exact_reps;
        const auto stats = parallel_map<std::pair<double, double>>(
            points.size() * per_point, threads, [&](std::size_t j) {
                const std::size_t pi = j / per_point, r = j % per_point;
                const Graph& src = r < per_point / 2 ? p1 : p2s[pi];
                Rng s = root.derive({3, pi, r});
                Rng s1 = s.derive(0), s2 = s.derive(1);
                const Graph a1 = sample_graph(src, s1), a2 = sample_graph(src, s2);
                TestOptions o = opts;
                o.threads = 1;
                return std::make_pair(want_exact ? pair_statistic(a1, a2, o) : 0.0,
                                      want_omni ? omni_statistic(a1, a2, omni_d) : 0.0);
            });
        for (std::size_t j = 0; j < stats.size(); ++j) {
            null_mase[j / per_point].push_back(stats[j].first);
            null_omni[j / per_point].push_back(stats[j].second);
        }
    }

    TestOptions inner = opts;
    inner.threads = 1;
    run_grid(rep, points, trials, seed, threads, [&](std::size_t p, std::size_t, Rng rng) {
        Rng s1 = rng.derive(0), s2 = rng.derive(1);
        const Graph a1 = sample_graph(p1, s1), a2 = sample_graph(p2s[p], s2);
        std::vector<Measurement> out;
        auto record = [&](const std::string& method, double pv) {
            out.push_back({method, "p_value", pv});
            out.push_back({method, "reject", pv <= level ? 1.0 : 0.0});
        };
        for (const auto& method : methods) {
            if (method == "bootstrap") record(method, bootstrap_test(a1, a2, inner, rng.derive(2)).p_value);
            else if (method == "asymptotic") record(method, asymptotic_test(a1, a2, inner, rng.derive(3)).p_value);
            else if (method == "exact") record(method, exceedance_p_value(null_mase[p], pair_statistic(a1, a2, inner)));
            else record(method, exceedance_p_value(null_omni[p], omni_statistic(a1, a2, omni_d)));
        }
        return out;
    });
    return rep;
}

} // namespace detail

inline const std::vector<std::string>& experiment_scenarios() {
    static const std::vector<std::string> names = {"subspace_error", "eigenvalue_bias",     "classification",
                                                   "model_error",    "community_detection", "testing_power"};
    return names;
}

/// Runs the named scenario. Output depends only on (scenario, config, seed).
inline ExperimentReport run_experiment(const std::string& scenario, const nlohmann::json& config,
                                       std::uint64_t seed, std::size_t threads = 1) {
    if (config.is_object() && config.contains("scenario"))
        require(config.at("scenario") == scenario, ErrorCode::invalid_argument,
                "config names scenario " + config.at("scenario").dump() + " but '" + scenario + "' was requested");
    ExperimentReport rep;
    if (scenario == "subspace_error") rep = detail::subspace_error(config, seed, threads);
    else if (scenario == "eigenvalue_bias") rep = detail::eigenvalue_bias(config, seed, threads);
    else if (scenario == "classification") rep = detail::classification(config, seed, threads);
    else if (scenario == "model_error") rep = detail::model_error(config, seed, threads);
    else if (scenario == "community_detection") rep = detail::community_detection(config, seed, threads);
    else if (scenario == "testing_power") rep = detail::testing_power(config, seed, threads);
    else fail(ErrorCode::invalid_argument, "unknown scenario '" + scenario + "'");
    rep.config["scenario"] = scenario;
    rep.config["seed"] = seed;
    return rep;
}

/// raw.csv, summary.csv and config_echo.json under dir.
inline void write_experiment(const std::filesystem::path& dir, const ExperimentReport& rep) {
    std::filesystem::create_directories(dir);
    write_text(dir / "raw.csv", rep.raw_csv());
    write_text(dir / "summary.csv", rep.summary_csv());
    write_text(dir / "config_echo.json", rep.config.dump(2) + "\n");
}

} // namespace cosie
