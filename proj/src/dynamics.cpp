#include "graphdyn/dynamics.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "graphdyn/errors.hpp"

namespace graphdyn {

TransitivityResult is_transitive(const PLMarkovMap& m) {
    IncidenceMatrix a = incidence_matrix(m);
    TransitivityResult r;
    r.certificate = scc_decomposition(a);
    r.strongly_connected = r.certificate.members.size() == 1;
    if (r.strongly_connected) {
        bool perm = true;
        for (const auto& row : a.succ)
            if (row.size() != 1) perm = false;
        r.cyclic_permutation = perm;
    }
    r.transitive = r.strongly_connected && !r.cyclic_permutation;
    r.heuristic = !m.graph().is_tree();
    return r;
}

PeriodDecomposition period_decomposition(const PLMarkovMap& m) {
    TransitivityResult t = is_transitive(m);
    if (!t.transitive) throw DomainError("period_decomposition requires a transitive map");
    IncidenceMatrix a = incidence_matrix(m);
    PeriodDecomposition d;
    std::vector<int> all(a.n);
    for (int i = 0; i < a.n; ++i) all[i] = i;
    d.k = scc_period(a, all);
    d.classes.assign(d.k, {});
    std::vector<int> level(a.n, -1);
    std::deque<int> q{0};
    level[0] = 0;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        for (int w : a.succ[v])
            if (level[w] == -1) {
                level[w] = (level[v] + 1) % d.k;
                q.push_back(w);
            }
    }
    for (int i = 0; i < a.n; ++i) d.classes[level[i]].push_back(a.ids[i]);
    return d;
}

Classification classify(const PLMarkovMap& m) {
    Classification c;
    TransitivityResult t = is_transitive(m);
    c.transitive = t.transitive;
    c.heuristic = t.heuristic;
    if (c.transitive) {
        IncidenceMatrix a = incidence_matrix(m);
        std::vector<int> all(a.n);
        for (int i = 0; i < a.n; ++i) all[i] = i;
        c.period = scc_period(a, all);
        c.totally_transitive = c.period == 1;
        c.exact = c.totally_transitive;
    }
    return c;
}

namespace {

struct AffineState {
    Rational a = 1, b = 0;  // local image coordinate = a*t + b
    Rational wlo = 0, whi = 0;
    bool empty = false;

    void clamp(const Rational& lo, const Rational& hi) {
        if (lo > wlo) wlo = lo;
        if (hi < whi) whi = hi;
        if (wlo > whi) empty = true;
    }
};

// Advance the composed affine map along one covering step from interval `cur`
// to interval `next` on the image path of `cur`.
bool affine_step(const PLMarkovMap& m, int cur, int next, AffineState& st) {
    const MarkovPartition& mp = m.partition();
    Rational alpha = m.expansion(cur);
    Rational s = 0;
    bool fwd = true, found = false;
    for (const auto& step : m.path(cur)) {
        if (step.interval == next) {
            fwd = step.fwd;
            found = true;
            break;
        }
        s += mp.interval(step.interval).length();
    }
    if (!found) return false;
    Rational next_len = mp.interval(next).length();
    // entry window in the current local coordinate u: alpha*u in [s, s+len]
    Rational ulo = s / alpha, uhi = (s + next_len) / alpha;
    // translate to the start coordinate t through u = a*t + b
    if (st.a > 0)
        st.clamp((ulo - st.b) / st.a, (uhi - st.b) / st.a);
    else
        st.clamp((uhi - st.b) / st.a, (ulo - st.b) / st.a);
    if (st.empty) return false;
    if (fwd) {
        st.a = alpha * st.a;
        st.b = alpha * st.b - s;
    } else {
        st.a = -alpha * st.a;
        st.b = next_len + s - alpha * st.b;
    }
    return true;
}

}  // namespace

std::vector<PeriodicPoint> periodic_points(const PLMarkovMap& m, long n, long walk_cap) {
    if (n < 1) throw DomainError("periodic_points requires n >= 1");
    const MarkovPartition& mp = m.partition();
    std::set<Point> seen;
    std::vector<PeriodicPoint> out;
    auto emit = [&](const Point& p, std::vector<std::string> itinerary, bool isolated) {
        Point q = m.graph().normalized(p);
        if (!seen.insert(q).second) return;
        out.push_back(PeriodicPoint{q, std::move(itinerary), isolated});
    };

    // partition points on n-cycles
    for (int pid = 0; pid < mp.point_count(); ++pid) {
        int cur = pid;
        std::vector<std::string> itin;
        for (long i = 0; i < n; ++i) {
            itin.push_back(mp.interval(m.interval_containing(mp.point(cur))).id);
            cur = m.image_of(cur);
        }
        if (cur == pid) emit(mp.point(pid), std::move(itin), true);
    }

    // interior solutions along closed walks
    IncidenceMatrix a = incidence_matrix(m);
    long walks = 0;
    std::vector<int> walk;
    auto solve_walk = [&]() {
        int start = walk[0];
        AffineState st;
        st.wlo = 0;
        st.whi = mp.interval(start).length();
        for (long i = 0; i < n; ++i) {
            if (!affine_step(m, walk[i], walk[(i + 1) % n], st)) return;
            if (st.empty) return;
        }
        std::vector<std::string> itin;
        for (int v : walk) itin.push_back(a.ids[v]);
        const Interval& iv = mp.interval(start);
        if (st.a == 1) {
            if (st.b != 0) return;
            emit(Point::on_edge(iv.edge, iv.lo + st.wlo), itin, false);
            emit(Point::on_edge(iv.edge, iv.lo + st.whi), itin, false);
            return;
        }
        Rational t = st.b / (1 - st.a);
        if (t < st.wlo || t > st.whi) return;
        emit(Point::on_edge(iv.edge, iv.lo + t), std::move(itin), true);
    };
    std::function<void(int)> dfs = [&](int depth) {
        if (depth == n) {
            if (a.at(walk.back(), walk[0])) {
                if (++walks > walk_cap)
                    throw ResourceError("periodic_points: closed-walk cap exceeded");
                solve_walk();
            }
            return;
        }
        for (int w : a.succ[walk.back()]) {
            walk.push_back(w);
            dfs(depth + 1);
            walk.pop_back();
        }
    };
    for (int v = 0; v < a.n; ++v) {
        walk = {v};
        dfs(1);
    }
    std::sort(out.begin(), out.end(),
              [](const PeriodicPoint& x, const PeriodicPoint& y) { return x.at < y.at; });
    return out;
}

std::optional<Horseshoe> loose_horseshoe_search(const PLMarkovMap& m, int s) {
    if (s < 2) throw DomainError("loose_horseshoe_search requires s >= 2");
    const MarkovPartition& mp = m.partition();

    std::vector<std::string> edge_ids;
    for (const auto& e : m.graph().edges()) edge_ids.push_back(e.id);

    for (const auto& eid : edge_ids) {
        const auto& ivs = mp.edge_intervals(eid);
        int k = (int)ivs.size();
        for (int len = k; len >= 1; --len) {
            for (int start = 0; start + len <= k; ++start) {
                if (len > 62) continue;
                std::vector<int> run(ivs.begin() + start, ivs.begin() + start + len);
                std::map<int, int> pos;
                for (int i = 0; i < len; ++i) pos[run[i]] = i;
                unsigned long full = len == 64 ? ~0ul : (1ul << len) - 1;
                std::vector<unsigned long> cover(len, 0);
                std::vector<bool> outside(len, false);
                for (int i = 0; i < len; ++i) {
                    for (const auto& st : m.path(run[i])) {
                        auto it = pos.find(st.interval);
                        if (it != pos.end())
                            cover[i] |= 1ul << it->second;
                        else
                            outside[i] = true;
                    }
                }
                // assign run intervals to at most s groups, each group must
                // reach full coverage of the run
                std::vector<unsigned long> groups;
                std::vector<std::vector<int>> group_members;
                long nodes = 0;
                std::function<bool(int)> assign = [&](int i) -> bool {
                    if (++nodes > 200000) return false;
                    int complete = 0;
                    for (auto g : groups)
                        if (g == full) ++complete;
                    if (complete >= s) return true;
                    if (i == len) return false;
                    if (cover[i] == 0) return assign(i + 1);
                    for (std::size_t g = 0; g < groups.size(); ++g) {
                        if (groups[g] == full) continue;
                        groups[g] |= cover[i];
                        group_members[g].push_back(i);
                        if (assign(i + 1)) return true;
                        group_members[g].pop_back();
                        groups[g] = 0;
                        for (int mbr : group_members[g]) groups[g] |= cover[mbr];
                    }
                    if ((int)groups.size() < s) {
                        groups.push_back(cover[i]);
                        group_members.push_back({i});
                        if (assign(i + 1)) return true;
                        groups.pop_back();
                        group_members.pop_back();
                    }
                    return assign(i + 1);  // leave unused
                };
                if (!assign(0)) continue;

                Horseshoe h;
                h.edge = eid;
                h.lo = mp.interval(run.front()).lo;
                h.hi = mp.interval(run.back()).hi;
                std::set<int> used;
                bool exceeds = false;
                for (std::size_t g = 0; g < groups.size(); ++g) {
                    if (groups[g] != full) continue;
                    std::vector<std::string> ids;
                    for (int i : group_members[g]) {
                        ids.push_back(mp.interval(run[i]).id);
                        used.insert(i);
                        if (outside[i]) exceeds = true;
                    }
                    h.branches.push_back(std::move(ids));
                    if ((int)h.branches.size() == s) break;
                }
                h.loose = exceeds || (int)used.size() < len;
                return h;
            }
        }
    }
    return std::nullopt;
}

BoundReport bound_report(const TopoGraph& g) {
    BoundReport r;
    r.kappa_value = kappa(g);
    r.corollary_bound = LogValue{Rational(3), (unsigned long)r.kappa_value};
    r.sharpened_bound = LogValue{Rational(3), (unsigned long)(r.kappa_value - 1)};
    return r;
}

}  // namespace graphdyn
