#pragma once

#include "cosie/error.hpp"
#include "cosie/graph.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cosie {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline std::string read_file(const std::filesystem::path& path) {
    if (path.empty()) fail(ErrorCode::io, "empty path");
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.empty()) fail(ErrorCode::io, "empty path");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    return out;
}

/// 17 significant digits: enough for an exact round trip of any finite double.
inline std::string format_double(double x) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(len));
}

} // namespace detail

/// Reads a whitespace-separated `u v [w]` edge list with 0-based indices.
/// `#` lines are comments; a `# n=<N>` header fixes the vertex count when
/// `n` is not given (otherwise n = 1 + max index), and `# kind=weighted`
/// marks a weighted graph.
inline Graph load_edge_list(const std::filesystem::path& path,
                            std::optional<std::size_t> n = std::nullopt) {
    const std::string text = detail::read_file(path);

    struct Edge {
        std::size_t u, v;
        double w;
    };
    std::vector<Edge> edges;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::optional<std::size_t> header_n;
    bool weighted = false;
    std::size_t max_index = 0;

    std::size_t line_no = 0;
    std::istringstream lines(text);
    std::string raw;
    while (std::getline(lines, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (line.front() == '#') {
            auto body = detail::trim(line.substr(1));
            if (body.rfind("n=", 0) == 0) {
                std::size_t value = 0;
                if (!detail::parse_number(detail::trim(body.substr(2)), value))
                    fail(ErrorCode::parse, where + ": malformed header '" + std::string(line) + "'");
                header_n = value;
            } else if (body == "kind=weighted") {
                weighted = true;
            }
            continue;
        }
        const auto tokens = detail::split_ws(line);
        if (tokens.size() != 2 && tokens.size() != 3)
            fail(ErrorCode::parse, where + ": expected 'u v' or 'u v w', got '" +
                                       std::string(line) + "'");
        Edge e{0, 0, 1.0};
        if (!detail::parse_number(tokens[0], e.u) || !detail::parse_number(tokens[1], e.v))
            fail(ErrorCode::parse, where + ": vertex indices must be non-negative integers");
        if (tokens.size() == 3) {
            if (!detail::parse_number(tokens[2], e.w) || !std::isfinite(e.w))
                fail(ErrorCode::parse, where + ": malformed weight '" + std::string(tokens[2]) + "'");
            weighted = true;
        }
        if (e.u == e.v)
            throw ValidationError(where + ": self-loop", std::make_pair(e.u, e.v));
        const auto key = std::minmax(e.u, e.v);
        if (!seen.insert(key).second)
            throw ValidationError(where + ": duplicate edge", std::make_pair(key.first, key.second));
        max_index = std::max({max_index, e.u, e.v});
        edges.push_back(e);
    }

    const std::size_t count = n ? *n : header_n ? *header_n : (edges.empty() ? 0 : max_index + 1);
    if (!edges.empty() && max_index >= count)
        fail(ErrorCode::validation, path.string() + ": vertex index " + std::to_string(max_index) +
                                        " >= n=" + std::to_string(count));

    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
    for (const auto& e : edges) {
        m(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v)) = e.w;
        m(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u)) = e.w;
    }
    return Graph(std::move(m), weighted ? GraphKind::weighted : GraphKind::binary);
}

/// Writes the upper triangle as an edge list with a `# n=` header.
inline void save_edge_list(const std::filesystem::path& path, const Graph& g) {
    if (g.kind() == GraphKind::probability)
        fail(ErrorCode::invalid_argument, "probability matrices are not edge lists; use save_matrix");
    auto out = detail::open_for_write(path);
    out << "# n=" << g.n() << '\n';
    if (g.kind() == GraphKind::weighted) out << "# kind=weighted\n";
    const Matrix& a = g.entries();
    for (Eigen::Index u = 0; u < a.rows(); ++u) {
        for (Eigen::Index v = u + 1; v < a.cols(); ++v) {
            if (a(u, v) == 0.0) continue;
            out << u << ' ' << v;
            if (g.kind() == GraphKind::weighted) out << ' ' << detail::format_double(a(u, v));
            out << '\n';
        }
    }
    if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

/// Loads a manifest. Either a JSON object
/// `{"graphs": [{"path": ..., "label": ..., "name": ...}, ...]}` or a plain
/// list of paths, one per line. Relative paths resolve against the manifest.
inline GraphCollection load_collection(const std::filesystem::path& manifest) {
    const std::string text = detail::read_file(manifest);
    const auto base = manifest.parent_path();

    struct Entry {
        std::string path;
        std::optional<std::string> label;
        std::optional<std::string> name;
    };
    std::vector<Entry> entries;

    const auto body = detail::trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::parse, manifest.string() + ": " + e.what());
        }
        if (!doc.contains("graphs") || !doc["graphs"].is_array())
            fail(ErrorCode::parse, manifest.string() + ": expected a \"graphs\" array");
        for (const auto& item : doc["graphs"]) {
            Entry e;
            if (item.is_string()) {
                e.path = item.get<std::string>();
            } else if (item.is_object() && item.contains("path") && item["path"].is_string()) {
                e.path = item["path"].get<std::string>();
                if (item.contains("label")) {
                    const auto& l = item["label"];
                    e.label = l.is_string() ? l.get<std::string>() : l.dump();
                }
                if (item.contains("name") && item["name"].is_string())
                    e.name = item["name"].get<std::string>();
            } else {
                fail(ErrorCode::parse, manifest.string() + ": graph entries need a \"path\"");
            }
            entries.push_back(std::move(e));
        }
    } else {
        std::istringstream lines(text);
        std::string raw;
        while (std::getline(lines, raw)) {
            const auto line = detail::trim(raw);
            if (line.empty() || line.front() == '#') continue;
            entries.push_back({std::string(line), std::nullopt, std::nullopt});
        }
    }

    const bool any_label = std::any_of(entries.begin(), entries.end(),
                                       [](const Entry& e) { return e.label.has_value(); });
    const bool all_label = std::all_of(entries.begin(), entries.end(),
                                       [](const Entry& e) { return e.label.has_value(); });
    if (any_label && !all_label)
        fail(ErrorCode::parse, manifest.string() + ": either every graph has a label or none does");

    std::vector<Graph> graphs;
    std::vector<std::string> labels, names;
    for (const auto& e : entries) {
        std::filesystem::path p(e.path);
        if (p.is_relative()) p = base / p;
        graphs.push_back(load_edge_list(p));
        if (e.label) labels.push_back(*e.label);
        names.push_back(e.name ? *e.name : std::filesystem::path(e.path).stem().string());
    }
    return GraphCollection(std::move(graphs),
                           any_label ? std::optional(std::move(labels)) : std::nullopt,
                           std::move(names));
}

/// Writes a JSON manifest referencing `paths` (stored as given).
inline void save_manifest(const std::filesystem::path& manifest,
                          const std::vector<std::string>& paths,
                          const std::optional<std::vector<std::string>>& labels = std::nullopt) {
    nlohmann::json doc;
    doc["graphs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < paths.size(); ++i) {
        nlohmann::json item{{"path", paths[i]}};
        if (labels) item["label"] = labels->at(i);
        doc["graphs"].push_back(std::move(item));
    }
    auto out = detail::open_for_write(manifest);
    out << doc.dump(2) << '\n';
}

/// Comma-separated rows, no header, 17 significant digits.
inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
    if (path.empty()) fail(ErrorCode::io, "empty path");
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (!std::isfinite(m(i, j)))
                fail(ErrorCode::invalid_argument, "non-finite entry at (" + std::to_string(i) +
                                                      ", " + std::to_string(j) + ")");
    std::string text;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) text += ',';
            text += detail::format_double(m(i, j));
        }
        text += '\n';
    }
    auto out = detail::open_for_write(path);
    out << text;
    if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

inline Matrix load_matrix(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(lines, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            const auto cell = detail::trim(line.substr(start, comma == std::string_view::npos
                                                                  ? std::string_view::npos
                                                                  : comma - start));
            double x = 0.0;
            if (!detail::parse_number(cell, x))
                fail(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) +
                                           ": malformed number '" + std::string(cell) + "'");
            row.push_back(x);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            fail(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) +
                                       ": ragged row (expected " +
                                       std::to_string(rows.front().size()) + " columns)");
        rows.push_back(std::move(row));
    }
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size());
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = detail::open_for_write(path);
    out << text;
    if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

} // namespace cosie
