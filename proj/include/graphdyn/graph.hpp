#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "graphdyn/rational.hpp"

namespace graphdyn {

struct GraphEdge {
    std::string id;
    std::string u, v;  // u == v allowed (loop)
    Rational length;
};

// A point of the carrier: either a vertex or an interior point of an edge.
// Offsets are measured from the edge's u end; loops use the fixed (u, v)
// orientation chosen at construction time.
struct Point {
    std::string vertex;  // set iff the point is a vertex
    std::string edge;
    Rational offset;

    bool is_vertex() const { return !vertex.empty(); }
    static Point at_vertex(std::string v) { return Point{std::move(v), "", Rational(0)}; }
    static Point on_edge(std::string e, Rational off) {
        return Point{"", std::move(e), std::move(off)};
    }
    friend bool operator==(const Point& a, const Point& b) {
        return a.vertex == b.vertex && a.edge == b.edge && a.offset == b.offset;
    }
    friend bool operator<(const Point& a, const Point& b) {
        if (a.vertex != b.vertex) return a.vertex < b.vertex;
        if (a.edge != b.edge) return a.edge < b.edge;
        return a.offset < b.offset;
    }
};

std::string point_str(const Point& p);

// Immutable metric multigraph, connected as a 1-complex, every edge of
// positive length, no isolated vertices.
class TopoGraph {
  public:
    static TopoGraph make(std::vector<std::string> vertices, std::vector<GraphEdge> edges);

    const std::vector<std::string>& vertices() const { return vertices_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }
    bool has_vertex(const std::string& v) const { return vertex_index_.count(v) != 0; }
    const GraphEdge& edge(const std::string& id) const;
    bool has_edge(const std::string& id) const { return edge_index_.count(id) != 0; }
    const std::vector<int>& incident_edges(const std::string& v) const;
    bool is_tree() const;
    Rational total_length() const;

    // Normalizes an (edge, offset) reference: offset 0 or full length becomes
    // the corresponding vertex. Throws on out-of-range offsets / unknown ids.
    Point normalized(const Point& p) const;

  private:
    std::vector<std::string> vertices_;
    std::vector<GraphEdge> edges_;
    std::map<std::string, int> vertex_index_;
    std::map<std::string, int> edge_index_;
    std::map<std::string, std::vector<int>> incidence_;
};

int euler_characteristic(const TopoGraph& g);

struct PointCensus {
    std::map<std::string, int> valence;
    std::vector<std::string> endpoints;       // valence 1
    std::vector<std::string> branching;       // valence > 2
};
PointCensus point_census(const TopoGraph& g);

// Least n > 0 such that every n-point subset disconnects the carrier.
// Decided over the candidate family of vertex subsets plus at most one
// interior marker per edge, on the combinatorial complement model.
int disconnection_number(const TopoGraph& g);

// disconnection_number(g) - euler_characteristic(g) + 1.
int kappa(const TopoGraph& g);

// Maximal disconnection number over subgraph models (edge subsets with stub
// arcs at excluded-edge ends). `resolution` caps the number of models.
int kappa_by_subgraphs(const TopoGraph& g, long resolution = 2'000'000);

struct Quotient {
    TopoGraph graph;
    std::map<std::string, std::string> vertex_projection;  // old vertex -> new vertex
    Point project(const Point& p) const;
};

// Merges each class of vertices into a single vertex (named after the
// lexicographically least member). Edge ids and lengths are unchanged.
Quotient identify_points(const TopoGraph& g, const std::vector<std::vector<std::string>>& classes);

}  // namespace graphdyn
