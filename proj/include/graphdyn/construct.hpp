#pragma once

#include <optional>

#include "graphdyn/certlog.hpp"
#include "graphdyn/dynamics.hpp"
#include "graphdyn/markov.hpp"

namespace graphdyn {

// Audit record of the auxiliary data a construction chooses. Every recorded
// point is a partition point of the emitted map and every recorded
// inequality holds in exact rational arithmetic.
struct ConstructionTrace {
    std::string kind;
    std::optional<Rational> r, s;
    long L = 0;
    long Lambda = 0;
    int stage = 0;
    int orbit_size = 0;
    std::vector<std::string> orbit;
    std::vector<std::pair<std::string, Point>> points;  // labeled recorded points
    std::vector<std::string> notes;
    bool has_entropies = false;
    EntropyEnclosure input_entropy, output_entropy;
};

struct Constructed {
    PLMarkovMap map;
    ConstructionTrace trace;
};

// The 3-branch tent map on an arc: P = {0, 1/3, 2/3, 1}, every branch covers
// the whole arc. Entropy exactly log 3.
Constructed tent3();

// The 4-piece interval map with P = {0, 1/6, 1/3, 1/2, 1}: transitive but
// not totally transitive, entropy exactly log sqrt(3), endpoints a 2-cycle.
Constructed b1_base();

// k copies of the base glued at a fixed partition point: copies shift by the
// identity, the last applies the map into copy 0. Entropy divides by k.
Constructed wedge_power(const PLMarkovMap& m, const std::string& fixed_pid, int k);

// Attach an arc at a fixed point z and extend transitively with certified
// entropy increase < eps; both ends of the new arc are fixed and endpoint
// cycles are preserved. The arc carries a descending interval chain whose
// length doubles until the certified bound holds.
Constructed edge_add(const PLMarkovMap& m, const std::string& fixed_pid, const Rational& eps);

// Surgery producing a totally transitive (hence exact) map from a transitive
// but not totally transitive Markov tree map, with certified entropy
// increase < eps and endpoint cycles preserved.
Constructed totalize(const PLMarkovMap& m, const Rational& eps);

struct PeriodicOrbitSpec {
    std::vector<std::string> pids;  // a single cycle, in orbit order
    bool endpoints_only = true;
};

// Finite stage of the pure-mixing surgery: one pendant arc per orbit point,
// folded fronts on the last arc through stage `stage`, isometric shifts on
// the tails. Certified entropy < max{h(m), log3/|O|} + eps.
Constructed purify_stage(const PLMarkovMap& m, const PeriodicOrbitSpec& orbit, const Rational& eps,
                         int stage);

struct StarExact {
    Constructed built;
    std::vector<std::string> endpoint_cycle;
};

// Exact map of the n-star with entropy in [log3/n, log3/n + eps) and all
// endpoints on a single cycle.
StarExact star_exact(int n, const Rational& eps);

struct BinaryExact {
    Constructed built;
    std::vector<std::string> endpoint_cycle;
    std::string central_root;  // fixed point, central root of the tree
};

// Exact map of the full binary tree with 2^n endpoints, entropy in
// [log3/2^n, log3/2^n + eps), endpoints a single cycle.
BinaryExact binary_exact(int n, const Rational& eps);

struct Side {
    std::string vertex;
    std::string edge;
    int end = 0;  // 0: the edge's u end, 1: the v end
    friend bool operator<(const Side& a, const Side& b) {
        return std::tie(a.vertex, a.edge, a.end) < std::tie(b.vertex, b.edge, b.end);
    }
    friend bool operator==(const Side& a, const Side& b) {
        return a.vertex == b.vertex && a.edge == b.edge && a.end == b.end;
    }
};

struct QuotientExample {
    std::string name;
    TopoGraph graph;      // quotient graph (sigma, theta, figure-eight, dumbbell)
    PLMarkovMap map;      // quotient map
    PLMarkovMap tree_map; // generating stage map on the tree
    std::vector<std::vector<std::string>> identified;  // leaf classes glued
    std::vector<Side> nacc;                            // declared inaccessible sides
    ConstructionTrace trace;
    LogValue target_radicand_bound;  // log-target the certified bound stays under (plus eps)
    Rational eps;
};

// name in {"sigma", "theta", "figure8", "dumbbell"}.
QuotientExample quotient_example(const std::string& name, const Rational& eps, int stage = 1);

struct UnfoldResult {
    TopoGraph graph;
    PLMarkovMap map;
    std::map<std::string, std::string> vertex_projection;  // new vertex -> old vertex
    std::vector<std::string> detached_endpoints;
    bool semiconjugacy_ok = false;
    long samples_checked = 0;
    bool nacc_bound_ok = false;     // |detached| < kappa(G)
    bool unique_preimage_ok = false;
    std::vector<std::string> notes;

    Point project(const Point& p) const;
};

// Detaches the declared inaccessible sides (splitting their vertices and
// adding one new endpoint per side), lifts the map, and verifies the
// semiconjugacy, the endpoint-count bound and unique preimages.
UnfoldResult unfold(const TopoGraph& g, const PLMarkovMap& m, const std::vector<Side>& nacc);

// --- shared construction utilities -----------------------------------------

// Adds cut points (plus their forward orbits until closed) to the partition
// of a Markov tree map. Images and dynamics are unchanged.
PLMarkovMap refine_at(const PLMarkovMap& m, const std::vector<Point>& points, long orbit_cap = 100000);

// Turns an interior cut point into a vertex by splitting its edge. The
// dynamics are unchanged; interval ids are renumbered.
PLMarkovMap promote_cut_to_vertex(const PLMarkovMap& m, const std::string& pid);

// Simplest rational x (smallest denominator, then numerator) whose log lies
// strictly between lo and hi + hi_off, certified.
Rational simplest_rational_log_between(const LogValue& lo, const LogValue& hi, const Rational& hi_off);

}  // namespace graphdyn
