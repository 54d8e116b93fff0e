#include "graphdyn/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "graphdyn/errors.hpp"

namespace graphdyn {

bool IncidenceMatrix::at(int i, int j) const {
    return std::binary_search(succ[i].begin(), succ[i].end(), j);
}

IncidenceMatrix incidence_matrix(const PLMarkovMap& m) {
    const MarkovPartition& mp = m.partition();
    IncidenceMatrix a;
    a.n = mp.interval_count();
    a.succ.resize(a.n);
    a.ids.resize(a.n);
    for (int i = 0; i < a.n; ++i) {
        a.ids[i] = mp.interval(i).id;
        for (const auto& st : m.path(i)) a.succ[i].push_back(st.interval);
        std::sort(a.succ[i].begin(), a.succ[i].end());
        a.succ[i].erase(std::unique(a.succ[i].begin(), a.succ[i].end()), a.succ[i].end());
    }
    return a;
}

SccDecomposition scc_decomposition(const IncidenceMatrix& a) {
    // Tarjan, iterative.
    SccDecomposition out;
    out.comp.assign(a.n, -1);
    std::vector<int> index(a.n, -1), low(a.n, 0), on_stack(a.n, 0);
    std::vector<int> stack;
    int counter = 0;
    struct Frame {
        int v;
        std::size_t child;
    };
    for (int root = 0; root < a.n; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.child < a.succ[f.v].size()) {
                int w = a.succ[f.v][f.child++];
                if (index[w] == -1) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    std::vector<int> members;
                    while (true) {
                        int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        out.comp[w] = (int)out.members.size();
                        members.push_back(w);
                        if (w == f.v) break;
                    }
                    std::sort(members.begin(), members.end());
                    out.members.push_back(std::move(members));
                }
                int v = f.v;
                call.pop_back();
                if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            }
        }
    }
    out.nontrivial.assign(out.members.size(), false);
    for (int v = 0; v < a.n; ++v)
        for (int w : a.succ[v])
            if (out.comp[v] == out.comp[w]) out.nontrivial[out.comp[v]] = true;
    return out;
}

int scc_period(const IncidenceMatrix& a, const std::vector<int>& members) {
    std::vector<int> level(a.n, -1);
    std::vector<char> in(a.n, 0);
    for (int v : members) in[v] = 1;
    std::deque<int> q{members.front()};
    level[members.front()] = 0;
    int g = 0;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        for (int w : a.succ[v]) {
            if (!in[w]) continue;
            if (level[w] == -1) {
                level[w] = level[v] + 1;
                q.push_back(w);
            } else {
                g = std::gcd(g, std::abs(level[v] + 1 - level[w]));
            }
        }
    }
    return g == 0 ? 1 : g;
}

namespace {

using Mat = std::vector<std::vector<BigInt>>;

Mat mat_mul(const Mat& x, const Mat& y) {
    int n = (int)x.size();
    Mat z(n, std::vector<BigInt>(n, 0));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            if (x[i][k] == 0) continue;
            const BigInt& f = x[i][k];
            for (int j = 0; j < n; ++j)
                if (y[k][j] != 0) z[i][j] += f * y[k][j];
        }
    return z;
}

long mat_bits(const Mat& x) {
    long total = 0;
    for (const auto& row : x)
        for (const auto& v : row)
            if (v != 0) total += (long)mpz_sizeinbase(v.get_mpz_t(), 2);
    return total;
}

struct BlockBounds {
    LogValue lower = LogValue::zero();
    LogValue upper = LogValue::zero();
    bool has_upper = false;
    int depth = 0;
    bool converged = false;

    void offer_lower(const LogValue& lv) { lower = lv_max(lower, lv); }
    void offer_upper(const LogValue& lv) {
        upper = has_upper ? lv_min(upper, lv) : lv;
        has_upper = true;
    }
    bool width_ok(const Rational& tol) const {
        if (!has_upper) return false;
        return lv_diff_at_most(lower, upper, tol);
    }
};

// Collatz-Wielandt: for strictly positive x, min (Bx)_i/x_i <= rho(B) <=
// max (Bx)_i/x_i. Sound for any nonnegative B.
void cw_bounds(const Mat& b, const std::vector<BigInt>& x, BlockBounds& bb, unsigned long period) {
    int n = (int)b.size();
    Rational lo, hi;
    bool first = true;
    for (int i = 0; i < n; ++i) {
        BigInt yi = 0;
        for (int j = 0; j < n; ++j)
            if (b[i][j] != 0) yi += b[i][j] * x[j];
        Rational r(yi, x[i]);
        r.canonicalize();
        if (first || r < lo) lo = r;
        if (first || r > hi) hi = r;
        first = false;
    }
    if (lo > 1) bb.offer_lower(LogValue{lo, period});
    bb.offer_upper(LogValue{hi, period});
}

// Row-sum bounds on rho(B)^(1/1) from M = B^(2^depth):
// minrs(M)^(1/2^depth) <= rho(B) <= maxrs(M)^(1/2^depth).
void rowsum_bounds(const Mat& m, int depth, BlockBounds& bb, unsigned long period) {
    BigInt lo, hi;
    bool first = true;
    for (const auto& row : m) {
        BigInt rs = 0;
        for (const auto& v : row) rs += v;
        if (first || rs < lo) lo = rs;
        if (first || rs > hi) hi = rs;
        first = false;
    }
    unsigned long root = period << depth;
    if (lo > 1) bb.offer_lower(LogValue{Rational(lo), root});
    bb.offer_upper(LogValue{Rational(hi), root});
    bb.depth = depth;
}

// Enclosure of log rho for one primitive block (the period-power of an SCC
// restricted to a cyclic class), divided by the period.
BlockBounds enclose_primitive(const Mat& b, unsigned long period, const EntropyOptions& opt) {
    BlockBounds bb;
    int n = (int)b.size();

    if (n > 64) {
        // Sparse double power iteration supplies the test vector; the bounds
        // themselves are exact.
        std::vector<std::vector<std::pair<int, double>>> rows(n);
        std::vector<std::vector<std::pair<int, BigInt>>> rows_z(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (b[i][j] != 0) {
                    rows[i].push_back({j, b[i][j].get_d()});
                    rows_z[i].push_back({j, b[i][j]});
                }
        std::vector<double> x(n, 1.0), y(n, 0.0);
        for (int it = 0; it < 3000; ++it) {
            double norm = 0;
            for (int i = 0; i < n; ++i) {
                double s = 0;
                for (auto& [j, w] : rows[i]) s += w * x[j];
                y[i] = s;
                norm = std::max(norm, s);
            }
            if (norm == 0) break;
            for (int i = 0; i < n; ++i) x[i] = y[i] / norm;
        }
        std::vector<BigInt> xi(n);
        for (int i = 0; i < n; ++i) {
            double scaled = x[i] * std::pow(2.0, 48);
            xi[i] = scaled < 1.0 ? BigInt(1) : BigInt(mpz_class(scaled));
        }
        std::vector<BigInt> yi(n);
        Rational lo, hi;
        bool first = true;
        for (int i = 0; i < n; ++i) {
            BigInt s = 0;
            for (auto& [j, w] : rows_z[i]) s += w * xi[j];
            Rational r(s, xi[i]);
            r.canonicalize();
            if (first || r < lo) lo = r;
            if (first || r > hi) hi = r;
            first = false;
        }
        if (lo > 1) bb.offer_lower(LogValue{lo, period});
        bb.offer_upper(LogValue{hi, period});
        bb.converged = bb.width_ok(opt.tol);
        if (bb.converged || n > 256) return bb;
    }

    Mat m = b;
    int depth = 0;
    while (true) {
        rowsum_bounds(m, depth, bb, period);
        cw_bounds(b, [&] {
            std::vector<BigInt> x((int)m.size());
            for (int i = 0; i < (int)m.size(); ++i) {
                BigInt rs = 0;
                for (const auto& v : m[i]) rs += v;
                x[i] = rs > 0 ? rs : BigInt(1);
            }
            return x;
        }(), bb, period);
        if (bb.width_ok(opt.tol)) {
            bb.converged = true;
            return bb;
        }
        if (depth >= opt.depth_cap) return bb;
        if (mat_bits(m) * 2 > opt.work_budget) return bb;
        m = mat_mul(m, m);
        ++depth;
    }
}

}  // namespace

EntropyEnclosure entropy_of_matrix(const IncidenceMatrix& a, const EntropyOptions& opt) {
    SccDecomposition sccs = scc_decomposition(a);
    EntropyEnclosure out;
    out.lower = LogValue::zero();
    out.upper = LogValue::zero();
    out.converged = true;
    bool any = false;
    for (std::size_t c = 0; c < sccs.members.size(); ++c) {
        if (!sccs.nontrivial[c]) continue;
        const auto& members = sccs.members[c];
        int p = scc_period(a, members);

        // Restrict to the members, compute the period power on the smallest
        // cyclic class.
        std::vector<int> level(a.n, -1);
        std::deque<int> q{members.front()};
        level[members.front()] = 0;
        std::vector<char> in(a.n, 0);
        for (int v : members) in[v] = 1;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            for (int w : a.succ[v])
                if (in[w] && level[w] == -1) {
                    level[w] = (level[v] + 1) % p;
                    q.push_back(w);
                }
        }
        std::vector<std::vector<int>> classes(p);
        for (int v : members) classes[level[v]].push_back(v);
        int best_class = 0;
        for (int i = 1; i < p; ++i)
            if (classes[i].size() < classes[best_class].size()) best_class = i;

        std::map<int, int> idx;
        for (int i = 0; i < (int)members.size(); ++i) idx[members[i]] = i;
        int nm = (int)members.size();
        Mat full(nm, std::vector<BigInt>(nm, 0));
        for (int v : members)
            for (int w : a.succ[v])
                if (in[w]) full[idx[v]][idx[w]] = 1;
        Mat power = full;
        for (int e = 1; e < p; ++e) power = mat_mul(power, full);
        const auto& cls = classes[best_class];
        int nc = (int)cls.size();
        Mat block(nc, std::vector<BigInt>(nc, 0));
        for (int i = 0; i < nc; ++i)
            for (int j = 0; j < nc; ++j) block[i][j] = power[idx[cls[i]]][idx[cls[j]]];

        BlockBounds bb = enclose_primitive(block, (unsigned long)p, opt);
        if (!any) {
            out.lower = bb.lower;
            out.upper = bb.upper;
        } else {
            out.lower = lv_max(out.lower, bb.lower);
            out.upper = lv_max(out.upper, bb.upper);
        }
        out.depth = std::max(out.depth, bb.depth);
        out.converged = out.converged && bb.converged;
        any = true;
    }
    if (!any) {
        out = EntropyEnclosure{};  // rho <= 1: exact zero
        return out;
    }
    if (lv_cmp(out.lower, LogValue::zero()) < 0) out.lower = LogValue::zero();
    if (lv_cmp(out.upper, LogValue::zero()) < 0) out.upper = LogValue::zero();
    if (!out.converged) out.converged = width_at_most(out, opt.tol);
    return out;
}

EntropyEnclosure entropy(const PLMarkovMap& m, const Rational& tol, int depth_cap) {
    EntropyOptions opt;
    opt.tol = tol;
    opt.depth_cap = depth_cap;
    EntropyEnclosure e = entropy_of_matrix(incidence_matrix(m), opt);
    e.base_has_circle = !m.graph().is_tree();
    return e;
}

}  // namespace graphdyn
