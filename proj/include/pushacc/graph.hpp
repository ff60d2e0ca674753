#pragma once

#include "pushacc/core.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace pushacc {

/// Communication topology. An edge (i, j) means agent i sends to agent j.
/// Indices are 0-based in memory and 1-based in the edge-list file format.
struct DirectedGraph {
    int n = 0;
    std::set<std::pair<int, int>> edges;
    std::uint64_t seed = 0;

    std::size_t edge_count() const { return edges.size(); }

    bool has_edge(int from, int to) const { return edges.count({from, to}) > 0; }

    std::vector<std::vector<int>> out_neighbors() const {
        std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
        for (const auto& [i, j] : edges) out[static_cast<std::size_t>(i)].push_back(j);
        return out;
    }

    /// Adds i -> j, rejecting self-loops and out-of-range indices.
    void add_edge(int from, int to) {
        require(from >= 0 && from < n && to >= 0 && to < n, "edge index out of range");
        require(from != to, "self-loops are not allowed in the edge set");
        edges.emplace(from, to);
    }
};

namespace detail {

inline void reach_from(int start, const std::vector<std::vector<int>>& adj, std::vector<char>& seen) {
    std::vector<int> stack{start};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int w : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                stack.push_back(w);
            }
        }
    }
}

inline std::size_t ring_edge_count(int n) { return n == 2 ? 2u : 2u * static_cast<std::size_t>(n); }

}  // namespace detail

/// True iff every node reaches every other node along directed edges.
/// Checked as: node 0 reaches all nodes in G and in the reversed graph.
inline bool is_strongly_connected(const DirectedGraph& g) {
    if (g.n <= 1) return g.n == 1;
    std::vector<std::vector<int>> fwd(static_cast<std::size_t>(g.n)), rev(static_cast<std::size_t>(g.n));
    for (const auto& [i, j] : g.edges) {
        fwd[static_cast<std::size_t>(i)].push_back(j);
        rev[static_cast<std::size_t>(j)].push_back(i);
    }
    for (const auto* adj : {&fwd, &rev}) {
        std::vector<char> seen(static_cast<std::size_t>(g.n), 0);
        detail::reach_from(0, *adj, seen);
        if (std::find(seen.begin(), seen.end(), 0) != seen.end()) return false;
    }
    return true;
}

/// Bidirected ring plus `extra_edges` distinct directed links drawn uniformly without
/// replacement from the pairs that are neither self-loops nor ring edges.
inline DirectedGraph build_cycle_plus_random(int n, std::size_t extra_edges, std::uint64_t seed) {
    require(n >= 2, "graph needs at least 2 agents");
    DirectedGraph g;
    g.n = n;
    g.seed = seed;
    for (int i = 0; i < n; ++i) {
        const int next = (i + 1) % n;
        g.add_edge(i, next);
        g.add_edge(next, i);
    }
    std::vector<std::pair<int, int>> candidates;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && !g.has_edge(i, j)) candidates.emplace_back(i, j);

    if (extra_edges > candidates.size()) {
        throw ConfigError("extra_edges = " + std::to_string(extra_edges) + " exceeds the " +
                          std::to_string(candidates.size()) + " available non-ring pairs");
    }
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates: the first extra_edges slots are a uniform sample
    for (std::size_t s = 0; s < extra_edges; ++s) {
        std::uniform_int_distribution<std::size_t> pick(s, candidates.size() - 1);
        std::swap(candidates[s], candidates[pick(rng)]);
        g.add_edge(candidates[s].first, candidates[s].second);
    }
    if (!is_strongly_connected(g)) throw NumericalError("generated graph is not strongly connected");
    return g;
}

/// Edge-list text format: "n <count>" then one "i j" pair (1-based) per line.
inline std::string to_edge_list(const DirectedGraph& g) {
    std::ostringstream os;
    os << "n " << g.n << '\n';
    for (const auto& [i, j] : g.edges) os << (i + 1) << ' ' << (j + 1) << '\n';
    return os.str();
}

inline DirectedGraph parse_edge_list(std::istream& in) {
    DirectedGraph g;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream ls(line);
        if (!have_header) {
            std::string tag;
            if (!(ls >> tag >> g.n) || tag != "n" || g.n < 1)
                throw ConfigError("edge list line " + std::to_string(lineno) + ": expected header 'n <count>'");
            have_header = true;
            continue;
        }
        int a = 0, b = 0;
        std::string rest;
        if (!(ls >> a >> b) || (ls >> rest))
            throw ConfigError("edge list line " + std::to_string(lineno) + ": expected 'i j'");
        try {
            g.add_edge(a - 1, b - 1);
        } catch (const ConfigError& e) {
            throw ConfigError("edge list line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw ConfigError("edge list is empty");
    return g;
}

inline void write_edge_list(const DirectedGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << to_edge_list(g);
}

inline DirectedGraph read_edge_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    return parse_edge_list(in);
}

}  // namespace pushacc
