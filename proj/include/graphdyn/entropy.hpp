#pragma once

#include <vector>

#include "graphdyn/certlog.hpp"
#include "graphdyn/markov.hpp"

namespace graphdyn {

// 0/1 covering relation among basic intervals: entry (i, j) is set iff
// interval j occurs on the image path of interval i. Simple paths make the
// multiplicity at most one.
struct IncidenceMatrix {
    int n = 0;
    std::vector<std::vector<int>> succ;  // sorted successor lists
    std::vector<std::string> ids;

    bool at(int i, int j) const;
};

IncidenceMatrix incidence_matrix(const PLMarkovMap& m);

struct SccDecomposition {
    std::vector<int> comp;                  // node -> component id
    std::vector<std::vector<int>> members;  // component id -> sorted nodes
    std::vector<bool> nontrivial;           // component has an internal edge
};

SccDecomposition scc_decomposition(const IncidenceMatrix& a);

// gcd of cycle lengths within one strongly connected component.
int scc_period(const IncidenceMatrix& a, const std::vector<int>& members);

struct EntropyOptions {
    Rational tol = Rational(1, 1000000);
    int depth_cap = 64;
    long work_budget = 60'000'000;  // caps big-integer powering work
};

// Certified enclosure of log rho(A): per strongly connected component the
// period-p power restricted to one cyclic class is primitive; row-sum and
// exact Collatz-Wielandt bounds at doubling depths enclose its spectral
// radius. Entropy of the map is log rho when rho > 1 and exactly 0 otherwise.
EntropyEnclosure entropy_of_matrix(const IncidenceMatrix& a, const EntropyOptions& opt = {});

EntropyEnclosure entropy(const PLMarkovMap& m, const Rational& tol = Rational(1, 1000000),
                         int depth_cap = 64);

}  // namespace graphdyn
