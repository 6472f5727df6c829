// cosie: command line front end for the header library.

#include "cosie/cosie.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<std::size_t> parse_dim(const std::string& text, const std::string& flag) {
    if (text == "auto") return std::nullopt;
    std::size_t v = 0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    cosie::require(ec == std::errc() && p == end && v >= 1, cosie::ErrorCode::invalid_argument,
                   flag + " expects a positive integer or 'auto', got '" + text + "'");
    return v;
}

/// "auto", one integer, or a comma-separated list with one value per graph.
std::optional<std::vector<std::size_t>> parse_dims(const std::string& text) {
    if (text == "auto") return std::nullopt;
    std::vector<std::size_t> dims;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) dims.push_back(*parse_dim(item, "--di"));
    return dims;
}

json vector_json(const cosie::Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

std::string spectrum_csv(std::size_t chosen, const cosie::Vector& values) {
    std::ostringstream os;
    os << "chosen_d," << chosen << "\nrank,value\n";
    for (Eigen::Index i = 0; i < values.size(); ++i)
        os << (i + 1) << ',' << cosie::detail::format_double(values(i)) << '\n';
    return os.str();
}

cosie::Matrix mean_adjacency(const cosie::GraphCollection& graphs) {
    cosie::Matrix mean = cosie::Matrix::Zero(static_cast<Eigen::Index>(graphs.n()), static_cast<Eigen::Index>(graphs.n()));
    for (const auto& g : graphs) mean += g.entries();
    return mean / static_cast<double>(graphs.size());
}

struct EmbedArgs {
    std::string manifest, out, d = "auto", di = "auto", method = "mase";
    bool scaled = false, unscaled = false;
    std::size_t threads = 1;
};

void run_embed(const EmbedArgs& a) {
    const auto graphs = cosie::load_collection(a.manifest);
    const auto d = parse_dim(a.d, "--d");
    fs::create_directories(a.out);
    json dims;
    dims["method"] = a.method;
    dims["n"] = graphs.n();
    dims["m"] = graphs.size();
    if (a.method == "mase") {
        cosie::MaseOptions opts;
        opts.d = d;
        opts.graph_dims = parse_dims(a.di);
        opts.scaled = a.scaled;
        opts.threads = a.threads;
        const auto fit = cosie::mase_fit(graphs, opts);
        cosie::save_matrix(fs::path(a.out) / "V.csv", fit.basis);
        for (std::size_t i = 0; i < fit.m(); ++i)
            cosie::save_matrix(fs::path(a.out) / ("R_" + std::to_string(i + 1) + ".csv"), fit.scores[i]);
        dims["d"] = fit.d;
        dims["graph_dims"] = fit.graph_dims;
        dims["scaled"] = fit.scaled;
        dims["singular_values"] = vector_json(fit.singular_values);
        dims["numerical_rank"] = fit.numerical_rank;
        dims["warnings"] = fit.warnings;
        for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
    } else {
        const std::size_t dd = d ? *d : cosie::select_graph_dimension(mean_adjacency(graphs));
        dims["d"] = dd;
        if (a.method == "mean-ase") {
            cosie::save_matrix(fs::path(a.out) / "V.csv", cosie::mean_ase(graphs, dd));
        } else {
            const auto omni = cosie::omni_embed(graphs, dd);
            for (std::size_t i = 0; i < omni.positions.size(); ++i)
                cosie::save_matrix(fs::path(a.out) / ("X_" + std::to_string(i + 1) + ".csv"), omni.positions[i]);
            dims["omnibus_values"] = vector_json(omni.values);
        }
    }
    if (graphs.labels()) dims["labels"] = *graphs.labels();
    cosie::write_text(fs::path(a.out) / "dims.json", dims.dump(2) + "\n");
}

struct SelectArgs {
    std::string manifest, di = "auto";
    std::optional<std::size_t> graph;
    std::size_t max_candidates = 0;
};

void run_select_dim(const SelectArgs& a) {
    const auto graphs = cosie::load_collection(a.manifest);
    const auto cap = a.max_candidates ? std::optional<std::size_t>(a.max_candidates) : std::nullopt;
    if (a.graph) {
        const std::size_t i = *a.graph;
        cosie::require(i >= 1 && i <= graphs.size(), cosie::ErrorCode::invalid_argument,
                       "--graph must lie in [1, " + std::to_string(graphs.size()) + "]");
        const auto& adj = graphs[i - 1].entries();
        const cosie::Vector mags = cosie::eigenvalues_by_magnitude(adj).cwiseAbs();
        std::cout << spectrum_csv(cosie::select_graph_dimension(adj, cap), mags);
        return;
    }
    cosie::MaseOptions opts;
    opts.graph_dims = parse_dims(a.di);
    opts.max_elbow_candidates = cap;
    const auto fit = cosie::mase_fit(graphs, opts);
    std::cout << spectrum_csv(fit.d, fit.singular_values);
}

struct ClusterArgs {
    std::string embedding, reference, out;
    std::size_t k = 2, restarts = 10, threads = 1;
    std::uint64_t seed = 0;
};

std::vector<std::size_t> load_reference(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(cosie::detail::read_file(path));
    } catch (const json::exception& e) {
        cosie::fail(cosie::ErrorCode::parse, path.string() + ": " + e.what());
    }
    const json& labels = doc.is_object() && doc.contains("z") ? doc["z"] : doc;
    cosie::require(labels.is_array(), cosie::ErrorCode::parse,
                   path.string() + ": expected an array of labels or {\"z\": [...]}");
    try {
        return labels.get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        cosie::fail(cosie::ErrorCode::parse, path.string() + ": " + e.what());
    }
}

void run_cluster(const ClusterArgs& a) {
    const cosie::Matrix v = cosie::load_matrix(fs::path(a.embedding) / "V.csv");
    cosie::KMeansOptions opts;
    opts.seed = a.seed;
    opts.restarts = a.restarts;
    opts.threads = a.threads;
    const auto res = cosie::kmeans_cluster(v, a.k, opts);
    json out;
    out["k"] = a.k;
    out["assignment"] = res.assignment;
    out["cost"] = res.cost;
    if (!a.reference.empty()) {
        const auto truth = load_reference(a.reference);
        std::size_t k = a.k;
        for (auto z : truth) k = std::max(k, z + 1);
        out["misclustered"] = cosie::misclustering_count(res.assignment, truth, k);
    }
    const std::string text = out.dump(2) + "\n";
    if (a.out.empty()) std::cout << text;
    else cosie::write_text(a.out, text);
}

struct TestArgs {
    std::string manifest, method = "bootstrap", out;
    std::size_t d = 3, reps = 1000, threads = 1;
    std::optional<std::size_t> di;
    bool scaled = false;
    std::uint64_t seed = 0;
};

void run_test(const TestArgs& a) {
    const auto graphs = cosie::load_collection(a.manifest);
    cosie::TestOptions opts;
    opts.d = a.d;
    opts.graph_dim = a.di.value_or(a.d);
    opts.scaled = a.scaled;
    opts.threads = a.threads;
    cosie::TestMethod method = cosie::TestMethod::bootstrap;
    if (a.method == "bootstrap") {
        opts.reps = a.reps;
    } else {
        method = cosie::TestMethod::asymptotic;
        opts.mc_reps = a.reps;
    }
    const auto pvals = cosie::pairwise_test_matrix(graphs, method, opts, cosie::Rng(a.seed));
    cosie::save_matrix(a.out, pvals);
}

struct ExperimentArgs {
    std::string scenario, config, out;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

void run_experiment_cmd(const ExperimentArgs& a) {
    json cfg = json::object();
    if (!a.config.empty()) {
        try {
            cfg = json::parse(cosie::detail::read_file(a.config));
        } catch (const json::exception& e) {
            cosie::fail(cosie::ErrorCode::parse, a.config + ": " + e.what());
        }
    }
    const auto report = cosie::run_experiment(a.scenario, cfg, a.seed, a.threads);
    cosie::write_experiment(a.out, report);
}

struct SampleArgs {
    std::string sbm, cosie_dir, out;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

void run_sample(const SampleArgs& a) {
    cosie::require(a.sbm.empty() != a.cosie_dir.empty(), cosie::ErrorCode::invalid_argument,
                   "give exactly one of --sbm or --cosie");
    const cosie::Rng rng(a.seed);
    const auto graphs = a.sbm.empty()
                            ? cosie::sample_collection(cosie::load_cosie_params(a.cosie_dir), rng, a.threads)
                            : cosie::sample_collection(cosie::load_sbm_params(a.sbm), rng, a.threads);
    fs::create_directories(a.out);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        files.push_back("graph_" + std::to_string(i + 1) + ".txt");
        cosie::save_edge_list(fs::path(a.out) / files.back(), graphs[i]);
    }
    cosie::save_manifest(fs::path(a.out) / "manifest.json", files);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"COSIE model toolkit: joint spectral embedding, testing and simulation"};
    app.require_subcommand(1);

    EmbedArgs embed;
    auto* c_embed = app.add_subcommand("embed", "Joint embedding of a graph collection");
    c_embed->add_option("--manifest", embed.manifest, "graph manifest")->required();
    c_embed->add_option("--d", embed.d, "joint dimension or 'auto'");
    c_embed->add_option("--di", embed.di, "per-graph dimension(s): 'auto', k, or k1,k2,...");
    auto* f_scaled = c_embed->add_flag("--scaled", embed.scaled, "scale per-graph embeddings");
    c_embed->add_flag("--unscaled", embed.unscaled, "orthonormal per-graph embeddings (default)")->excludes(f_scaled);
    c_embed->add_option("--out", embed.out, "output directory")->required();
    c_embed->add_option("--method", embed.method, "mase, omni or mean-ase")
        ->check(CLI::IsMember({"mase", "omni", "mean-ase"}));
    c_embed->add_option("--threads", embed.threads, "worker threads")->check(CLI::PositiveNumber);

    SelectArgs select;
    auto* c_select = app.add_subcommand("select-dim", "Elbow dimension and spectrum (CSV)");
    c_select->add_option("--manifest", select.manifest, "graph manifest")->required();
    c_select->add_option("--graph", select.graph, "1-based graph index; omit for the joint dimension");
    c_select->add_option("--di", select.di, "per-graph dimension(s) for the joint scan");
    c_select->add_option("--max-candidates", select.max_candidates, "number of leading values scanned");

    ClusterArgs cluster;
    auto* c_cluster = app.add_subcommand("cluster", "K-means on the rows of V.csv");
    c_cluster->add_option("--embedding", cluster.embedding, "directory holding V.csv")->required();
    c_cluster->add_option("--k", cluster.k, "number of clusters")->required()->check(CLI::PositiveNumber);
    c_cluster->add_option("--seed", cluster.seed, "random seed");
    c_cluster->add_option("--reference", cluster.reference, "JSON with 0-based true labels");
    c_cluster->add_option("--restarts", cluster.restarts, "k-means++ restarts")->check(CLI::PositiveNumber);
    c_cluster->add_option("--threads", cluster.threads, "worker threads")->check(CLI::PositiveNumber);
    c_cluster->add_option("--out", cluster.out, "write JSON here instead of stdout");

    TestArgs test;
    auto* c_test = app.add_subcommand("test", "All-pairs two-sample test p-values");
    c_test->add_option("--manifest", test.manifest, "graph manifest")->required();
    c_test->add_option("--method", test.method, "bootstrap or asymptotic")
        ->check(CLI::IsMember({"bootstrap", "asymptotic"}));
    c_test->add_option("--d", test.d, "joint dimension")->check(CLI::PositiveNumber);
    c_test->add_option("--di", test.di, "per-graph dimension (default: d)")->check(CLI::PositiveNumber);
    c_test->add_option("--reps", test.reps, "bootstrap pairs, or Gaussian draws per graph")
        ->check(CLI::PositiveNumber);
    c_test->add_flag("--scaled", test.scaled, "scaled per-graph embeddings");
    c_test->add_option("--seed", test.seed, "random seed");
    c_test->add_option("--out", test.out, "p-value matrix CSV")->required();
    c_test->add_option("--threads", test.threads, "worker threads")->check(CLI::PositiveNumber);

    ExperimentArgs exp;
    auto* c_exp = app.add_subcommand("experiment", "Run a simulation scenario");
    c_exp->add_option("--scenario", exp.scenario, "scenario name")
        ->required()
        ->check(CLI::IsMember(cosie::experiment_scenarios()));
    c_exp->add_option("--config", exp.config, "JSON config (defaults used when omitted)");
    c_exp->add_option("--out", exp.out, "output directory")->required();
    c_exp->add_option("--seed", exp.seed, "random seed");
    c_exp->add_option("--threads", exp.threads, "worker threads")->check(CLI::PositiveNumber);

    SampleArgs sample;
    auto* c_sample = app.add_subcommand("sample", "Sample graphs from model parameters");
    c_sample->add_option("--sbm", sample.sbm, "multilayer SBM JSON (z, B)");
    c_sample->add_option("--cosie", sample.cosie_dir, "directory with V.csv and R_<i>.csv");
    c_sample->add_option("--seed", sample.seed, "random seed");
    c_sample->add_option("--out", sample.out, "output directory")->required();
    c_sample->add_option("--threads", sample.threads, "worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_embed) run_embed(embed);
        else if (*c_select) run_select_dim(select);
        else if (*c_cluster) run_cluster(cluster);
        else if (*c_test) run_test(test);
        else if (*c_exp) run_experiment_cmd(exp);
        else if (*c_sample) run_sample(sample);
    } catch (const cosie::Error& e) {
        std::cerr << "error [" << cosie::to_string(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
