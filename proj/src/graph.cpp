#include "graphdyn/graph.hpp"

#include <algorithm>
#include <numeric>

#include "graphdyn/errors.hpp"

namespace graphdyn {

std::string point_str(const Point& p) {
    if (p.is_vertex()) return p.vertex;
    return p.edge + "@" + rat_str(p.offset);
}

namespace {

struct Dsu {
    std::vector<int> parent;
    explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

TopoGraph TopoGraph::make(std::vector<std::string> vertices, std::vector<GraphEdge> edges) {
    TopoGraph g;
    std::sort(vertices.begin(), vertices.end());
    if (std::adjacent_find(vertices.begin(), vertices.end()) != vertices.end())
        throw DomainError("duplicate vertex id");
    std::sort(edges.begin(), edges.end(),
              [](const GraphEdge& a, const GraphEdge& b) { return a.id < b.id; });
    g.vertices_ = std::move(vertices);
    g.edges_ = std::move(edges);
    for (int i = 0; i < (int)g.vertices_.size(); ++i) g.vertex_index_[g.vertices_[i]] = i;
    if (g.edges_.empty()) throw DomainError("graph must have at least one edge");
    for (int i = 0; i < (int)g.edges_.size(); ++i) {
        const GraphEdge& e = g.edges_[i];
        if (g.edge_index_.count(e.id)) throw DomainError("duplicate edge id '" + e.id + "'");
        if (!g.vertex_index_.count(e.u) || !g.vertex_index_.count(e.v))
            throw DomainError("edge '" + e.id + "' references unknown vertex");
        if (e.length <= 0) throw DomainError("edge '" + e.id + "' has non-positive length");
        g.edge_index_[e.id] = i;
        g.incidence_[e.u].push_back(i);
        if (e.v != e.u) g.incidence_[e.v].push_back(i);
    }
    for (const auto& v : g.vertices_)
        if (!g.incidence_.count(v)) throw DomainError("isolated vertex '" + v + "'");
    Dsu dsu((int)g.vertices_.size());
    for (const auto& e : g.edges_) dsu.unite(g.vertex_index_[e.u], g.vertex_index_[e.v]);
    for (int i = 1; i < (int)g.vertices_.size(); ++i)
        if (dsu.find(i) != dsu.find(0)) throw DomainError("graph is not connected");
    return g;
}

const GraphEdge& TopoGraph::edge(const std::string& id) const {
    auto it = edge_index_.find(id);
    if (it == edge_index_.end()) throw DomainError("unknown edge id '" + id + "'");
    return edges_[it->second];
}

const std::vector<int>& TopoGraph::incident_edges(const std::string& v) const {
    auto it = incidence_.find(v);
    if (it == incidence_.end()) throw DomainError("unknown vertex id '" + v + "'");
    return it->second;
}

bool TopoGraph::is_tree() const { return edges_.size() + 1 == vertices_.size(); }

Rational TopoGraph::total_length() const {
    Rational s = 0;
    for (const auto& e : edges_) s += e.length;
    return s;
}

Point TopoGraph::normalized(const Point& p) const {
    if (p.is_vertex()) {
        if (!has_vertex(p.vertex)) throw DomainError("unknown vertex '" + p.vertex + "'");
        return Point::at_vertex(p.vertex);
    }
    const GraphEdge& e = edge(p.edge);
    if (p.offset < 0 || p.offset > e.length)
        throw DomainError("offset " + rat_str(p.offset) + " outside edge '" + e.id + "'");
    if (p.offset == 0) return Point::at_vertex(e.u);
    if (p.offset == e.length) return Point::at_vertex(e.v);
    return p;
}

int euler_characteristic(const TopoGraph& g) {
    return (int)g.vertices().size() - (int)g.edges().size();
}

PointCensus point_census(const TopoGraph& g) {
    PointCensus c;
    for (const auto& v : g.vertices()) c.valence[v] = 0;
    for (const auto& e : g.edges()) {
        c.valence[e.u] += 1;
        c.valence[e.v] += 1;  // loop contributes 2 to its vertex
    }
    for (const auto& [v, d] : c.valence) {
        if (d == 1) c.endpoints.push_back(v);
        if (d > 2) c.branching.push_back(v);
    }
    return c;
}

namespace {

// Largest non-disconnecting set of the candidate family (vertex subset plus
// at most one interior marker per edge). For a deleted-vertex set S with
// surviving vertices V' and E_vv the edges with both ends alive, the optimal
// marking removes every non-spanning-tree edge of (V', E_vv); marked-edge
// stubs and half-open pieces all attach to surviving vertices. A config is
// valid iff no edge lies inside S and (V', E_vv) is connected. Complement =
// single open edge interior is handled separately (all vertices of a
// one-edge graph deleted). Leaves can always be deleted at an optimum (for
// graphs with >= 2 edges), which keeps the scan small.
int max_non_disconnecting(const TopoGraph& g) {
    const auto& vs = g.vertices();
    const auto& es = g.edges();
    int n = (int)vs.size();
    std::map<std::string, int> vidx;
    for (int i = 0; i < n; ++i) vidx[vs[i]] = i;

    int best = 0;
    if (es.size() == 1) best = std::max(best, n);  // delete everything: one open piece

    std::vector<int> deg(n, 0);
    for (const auto& e : es) {
        deg[vidx.at(e.u)] += 1;
        deg[vidx.at(e.v)] += 1;
    }
    std::vector<int> free_vs;  // non-leaf vertices: scanned
    std::vector<int> leaf(n, 0);
    for (int i = 0; i < n; ++i) {
        if (deg[i] == 1 && es.size() >= 2)
            leaf[i] = 1;
        else
            free_vs.push_back(i);
    }
    int m = (int)free_vs.size();
    if (m > 26) throw ResourceError("disconnection_number: vertex scan too large");

    for (unsigned long mask = 0; mask < (1ul << m); ++mask) {
        std::vector<char> in_s(n, 0);
        for (int i = 0; i < n; ++i)
            if (leaf[i]) in_s[i] = 1;
        for (int b = 0; b < m; ++b)
            if (mask & (1ul << b)) in_s[free_vs[b]] = 1;

        int s_count = 0;
        for (int i = 0; i < n; ++i) s_count += in_s[i];
        if (s_count == n) continue;  // V' empty handled by the one-edge case

        bool valid = true;
        int evv = 0;
        Dsu dsu(n);
        for (const auto& e : es) {
            int a = vidx.at(e.u), b = vidx.at(e.v);
            if (in_s[a] && in_s[b]) {
                valid = false;  // orphan open piece
                break;
            }
            if (!in_s[a] && !in_s[b]) {
                ++evv;
                dsu.unite(a, b);
            }
        }
        if (!valid) continue;
        std::set<int> roots;
        for (int i = 0; i < n; ++i)
            if (!in_s[i]) roots.insert(dsu.find(i));
        if (roots.size() != 1) continue;
        int survivors = n - s_count;
        best = std::max(best, s_count + evv - survivors + 1);
    }
    return best;
}

}  // namespace

int disconnection_number(const TopoGraph& g) { return max_non_disconnecting(g) + 1; }

int kappa(const TopoGraph& g) { return disconnection_number(g) - euler_characteristic(g) + 1; }

namespace {

TopoGraph model_graph(const TopoGraph& g, const std::vector<int>& edge_subset,
                      const std::vector<std::pair<int, int>>& stubs) {
    // stubs: (edge index, end 0/1) attached at that end's vertex, length 1/3
    // of the parent edge so that stubs from both ends of one edge stay
    // disjoint.
    std::set<std::string> vset;
    std::vector<GraphEdge> edges;
    for (int ei : edge_subset) {
        const GraphEdge& e = g.edges()[ei];
        vset.insert(e.u);
        vset.insert(e.v);
        edges.push_back(e);
    }
    int k = 0;
    for (auto [ei, end] : stubs) {
        const GraphEdge& e = g.edges()[ei];
        std::string at = end == 0 ? e.u : e.v;
        vset.insert(at);
        std::string leaf = "stub." + std::to_string(k++);
        edges.push_back(GraphEdge{leaf, at, leaf, e.length / 3});
        vset.insert(leaf);
    }
    return TopoGraph::make(std::vector<std::string>(vset.begin(), vset.end()), std::move(edges));
}

}  // namespace

int kappa_by_subgraphs(const TopoGraph& g, long resolution) {
    int ne = (int)g.edges().size();
    if (ne > 20) throw ResourceError("kappa_by_subgraphs: too many edges");
    long models = 0;
    int best = 0;

    // Star models: stubs only, all at one vertex.
    for (const auto& v : g.vertices()) {
        std::vector<std::pair<int, int>> stubs;
        for (int ei : g.incident_edges(v)) {
            const GraphEdge& e = g.edges()[ei];
            if (e.u == v) stubs.push_back({ei, 0});
            if (e.v == v) stubs.push_back({ei, 1});
        }
        if (stubs.empty()) continue;
        if (++models > resolution) throw ResourceError("kappa_by_subgraphs: model cap exceeded");
        best = std::max(best, disconnection_number(model_graph(g, {}, stubs)));
    }

    // Edge-subset models with the maximal stub pattern. Adding a stub never
    // decreases the disconnection number, so maximal patterns suffice.
    for (unsigned long mask = 1; mask < (1ul << ne); ++mask) {
        std::vector<int> subset;
        std::set<std::string> included_vs;
        for (int i = 0; i < ne; ++i)
            if (mask & (1ul << i)) {
                subset.push_back(i);
                included_vs.insert(g.edges()[i].u);
                included_vs.insert(g.edges()[i].v);
            }
        // connectivity of the included edge set
        {
            std::map<std::string, int> vi;
            int c = 0;
            for (const auto& v : included_vs) vi[v] = c++;
            Dsu dsu(c);
            for (int ei : subset) dsu.unite(vi[g.edges()[ei].u], vi[g.edges()[ei].v]);
            int roots = 0;
            for (int i = 0; i < c; ++i)
                if (dsu.find(i) == i) ++roots;
            if (roots != 1) continue;
        }
        std::vector<std::pair<int, int>> stubs;
        for (int i = 0; i < ne; ++i) {
            if (mask & (1ul << i)) continue;
            const GraphEdge& e = g.edges()[i];
            if (included_vs.count(e.u)) stubs.push_back({i, 0});
            if (included_vs.count(e.v)) stubs.push_back({i, 1});
        }
        if (++models > resolution) throw ResourceError("kappa_by_subgraphs: model cap exceeded");
        best = std::max(best, disconnection_number(model_graph(g, subset, stubs)));
    }
    return best;
}

Point Quotient::project(const Point& p) const {
    if (!p.is_vertex()) return p;
    auto it = vertex_projection.find(p.vertex);
    return Point::at_vertex(it == vertex_projection.end() ? p.vertex : it->second);
}

Quotient identify_points(const TopoGraph& g, const std::vector<std::vector<std::string>>& classes) {
    std::map<std::string, std::string> proj;
    for (const auto& v : g.vertices()) proj[v] = v;
    std::set<std::string> used;
    for (const auto& cls : classes) {
        if (cls.empty()) throw DomainError("identify_points: empty class");
        std::string rep = *std::min_element(cls.begin(), cls.end());
        for (const auto& v : cls) {
            if (!g.has_vertex(v)) throw DomainError("identify_points: '" + v + "' is not a vertex");
            if (!used.insert(v).second)
                throw DomainError("identify_points: classes are not disjoint at '" + v + "'");
            proj[v] = rep;
        }
    }
    std::set<std::string> vset;
    for (const auto& [v, r] : proj) vset.insert(r);
    std::vector<GraphEdge> edges;
    for (const auto& e : g.edges())
        edges.push_back(GraphEdge{e.id, proj.at(e.u), proj.at(e.v), e.length});
    Quotient q{TopoGraph::make(std::vector<std::string>(vset.begin(), vset.end()), std::move(edges)),
               std::move(proj)};
    return q;
}

}  // namespace graphdyn
