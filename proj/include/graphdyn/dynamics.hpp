#pragma once

#include <optional>

#include "graphdyn/entropy.hpp"
#include "graphdyn/markov.hpp"

namespace graphdyn {

struct TransitivityResult {
    bool transitive = false;
    bool strongly_connected = false;
    bool cyclic_permutation = false;
    bool heuristic = false;  // base graph has circles: criterion applied beyond trees
    SccDecomposition certificate;
};

// Strong connectivity of the Markov graph, excluding cyclic permutations.
TransitivityResult is_transitive(const PLMarkovMap& m);

struct PeriodDecomposition {
    int k = 1;
    std::vector<std::vector<std::string>> classes;  // interval ids, class i maps into i+1 mod k
};

// Cyclic class structure of a transitive map; k = 1 iff totally transitive.
PeriodDecomposition period_decomposition(const PLMarkovMap& m);

struct Classification {
    bool transitive = false;
    bool totally_transitive = false;
    bool exact = false;  // equals totally_transitive for piecewise-monotone Markov maps
    bool heuristic = false;
    int period = 1;
};

Classification classify(const PLMarkovMap& m);

struct PeriodicPoint {
    Point at;
    std::vector<std::string> itinerary;  // interval ids along the orbit
    bool isolated = true;                // false: an interval of period-n points
};

// All exact solutions of f^n(x) = x whose orbits follow length-n closed
// walks of the Markov graph, plus partition points on n-cycles.
std::vector<PeriodicPoint> periodic_points(const PLMarkovMap& m, long n, long walk_cap = 200000);

struct Horseshoe {
    std::string edge;
    Rational lo, hi;                                  // the free arc J
    std::vector<std::vector<std::string>> branches;   // s groups of interval ids
    bool loose = false;
};

// Search for s pairwise interior-disjoint unions of basic intervals inside a
// free arc J (a run of consecutive intervals within one edge), each of whose
// images covers J.
std::optional<Horseshoe> loose_horseshoe_search(const PLMarkovMap& m, int s);

struct BoundReport {
    int kappa_value = 0;
    LogValue corollary_bound;   // log 3 / kappa
    LogValue sharpened_bound;   // log 3 / (kappa - 1)
};

BoundReport bound_report(const TopoGraph& g);

}  // namespace graphdyn
