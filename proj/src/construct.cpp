#include "graphdyn/construct.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "graphdyn/entropy.hpp"
#include "graphdyn/errors.hpp"

namespace graphdyn {

namespace {

struct Pieces {
    TopoGraph graph;
    std::vector<CutPoint> cuts;
    std::map<std::string, Point> images;
};

Pieces pieces_of(const PLMarkovMap& m) {
    const MarkovPartition& mp = m.partition();
    Pieces p{mp.graph(), mp.cuts(), {}};
    for (int i = 0; i < mp.point_count(); ++i)
        p.images[mp.pid(i)] = mp.point(m.image_of(i));
    return p;
}

Point image_point(const PLMarkovMap& m, int pid) {
    return m.partition().point(m.image_of(pid));
}

// Arc-length position of `target` along the image path of interval `iv`,
// measured from the path start. Throws when the point is not on the path.
Rational arc_position(const PLMarkovMap& m, int iv, const Point& target) {
    const MarkovPartition& mp = m.partition();
    Point t = m.graph().normalized(target);
    int tpid = mp.find_pid(t);
    const auto& steps = m.path(iv);
    int at = steps.front().fwd ? mp.interval(steps.front().interval).lo_pid
                               : mp.interval(steps.front().interval).hi_pid;
    if (tpid >= 0 && tpid == at) return Rational(0);
    Rational acc = 0;
    for (const auto& st : steps) {
        const Interval& si = mp.interval(st.interval);
        if (tpid < 0 && t.edge == si.edge && si.lo <= t.offset && t.offset <= si.hi)
            return acc + (st.fwd ? Rational(t.offset - si.lo) : Rational(si.hi - t.offset));
        acc += si.length();
        at = st.fwd ? si.hi_pid : si.lo_pid;
        if (tpid >= 0 && tpid == at) return acc;
    }
    throw DomainError("point " + point_str(target) + " is not on the image path of " +
                      mp.interval(iv).id);
}

// Unique preimage of `target` inside interval `iv` (the branch is injective).
Point preimage_on_interval(const PLMarkovMap& m, int iv, const Point& target) {
    const Interval& ivl = m.partition().interval(iv);
    Rational u = arc_position(m, iv, target) / m.expansion(iv);
    return m.graph().normalized(Point::on_edge(ivl.edge, ivl.lo + u));
}

int far_end(const MarkovPartition& mp, int iv, int near_pid) {
    const Interval& i = mp.interval(iv);
    return i.lo_pid == near_pid ? i.hi_pid : i.lo_pid;
}

long least_power_with_margin(const Rational& r, const Rational& s) {
    Rational rp = 1, sp = 1;
    for (long k = 1; k <= 100000; ++k) {
        rp *= r;
        sp *= s;
        if (3 * rp < sp) return k;
    }
    throw ResourceError("no window length with 3 r^L < s^L below the cap");
}

}  // namespace

Rational simplest_rational_log_between(const LogValue& lo, const LogValue& hi,
                                       const Rational& hi_off) {
    double elo = std::exp(lo.approx());
    double ehi = std::exp(hi.approx() + rat_double(hi_off));
    for (long d = 1; d <= 1000000; ++d) {
        long nmin = (long)std::floor(elo * (double)d) - 1;
        long nmax = (long)std::ceil(ehi * (double)d) + 1;
        for (long n = std::max(2l, nmin); n <= nmax; ++n) {
            if (std::gcd(n, d) != 1) continue;
            LogValue cand{rat(n, d), 1};
            if (lv_cmp(cand, lo) > 0 && lv_cmp_offset(hi, hi_off, cand) > 0) return rat(n, d);
        }
    }
    throw ResourceError("no simple rational in the requested log window");
}

Constructed tent3() {
    TopoGraph g = TopoGraph::make({"0", "1"}, {{"a", "0", "1", rat(1)}});
    MapData d;
    d.graph = g;
    d.cuts = {{"c1", Point::on_edge("a", rat(1, 3))}, {"c2", Point::on_edge("a", rat(2, 3))}};
    d.point_images["0"] = Point::at_vertex("0");
    d.point_images["c1"] = Point::at_vertex("1");
    d.point_images["c2"] = Point::at_vertex("0");
    d.point_images["1"] = Point::at_vertex("1");
    Constructed c{PLMarkovMap::build(std::move(d)), {}};
    c.trace.kind = "tent3";
    return c;
}

Constructed b1_base() {
    TopoGraph g = TopoGraph::make({"0", "1"}, {{"a", "0", "1", rat(1)}});
    MapData d;
    d.graph = g;
    d.cuts = {{"c1", Point::on_edge("a", rat(1, 6))},
              {"c2", Point::on_edge("a", rat(1, 3))},
              {"c3", Point::on_edge("a", rat(1, 2))}};
    d.point_images["0"] = Point::at_vertex("1");
    d.point_images["c1"] = Point::on_edge("a", rat(1, 2));
    d.point_images["c2"] = Point::at_vertex("1");
    d.point_images["c3"] = Point::on_edge("a", rat(1, 2));
    d.point_images["1"] = Point::at_vertex("0");
    Constructed c{PLMarkovMap::build(std::move(d)), {}};
    c.trace.kind = "b1_base";
    return c;
}

PLMarkovMap refine_at(const PLMarkovMap& m, const std::vector<Point>& points, long orbit_cap) {
    if (!m.graph().is_tree()) throw DomainError("refine_at supports tree maps only");
    const MarkovPartition& mp = m.partition();
    std::set<Point> fresh;
    std::deque<Point> work;
    for (const auto& p : points) {
        Point q = m.graph().normalized(p);
        if (mp.find_pid(q) < 0 && !fresh.count(q)) {
            fresh.insert(q);
            work.push_back(q);
        }
    }
    long steps = 0;
    while (!work.empty()) {
        if (++steps > orbit_cap) throw ResourceError("refine_at: orbit closure cap exceeded");
        Point img = m.evaluate(work.front());
        work.pop_front();
        if (mp.find_pid(img) < 0 && !fresh.insert(img).second) continue;
        if (mp.find_pid(img) < 0) work.push_back(img);
    }
    Pieces p = pieces_of(m);
    long k = 0;
    for (const auto& q : fresh) {
        std::string id;
        do {
            id = "r" + std::to_string(k++);
        } while (p.images.count(id));
        p.cuts.push_back({id, q});
        p.images[id] = m.evaluate(q);
    }
    MapData d{std::move(p.graph), std::move(p.cuts), std::move(p.images), std::nullopt};
    return PLMarkovMap::build(std::move(d));
}

PLMarkovMap promote_cut_to_vertex(const PLMarkovMap& m, const std::string& pid) {
    if (!m.graph().is_tree()) throw DomainError("promote_cut_to_vertex supports tree maps only");
    const MarkovPartition& mp = m.partition();
    int idx = mp.pid_index(pid);
    Point at = mp.point(idx);
    if (at.is_vertex()) return m;
    const GraphEdge& e = m.graph().edge(at.edge);
    std::string ea = e.id + ".a", eb = e.id + ".b";
    Rational cut_off = at.offset;
    auto reanchor = [&](const Point& q) -> Point {
        if (q.is_vertex() || q.edge != e.id) return q;
        if (q.offset <= cut_off) return Point::on_edge(ea, q.offset);
        return Point::on_edge(eb, q.offset - cut_off);
    };
    std::vector<std::string> vs = m.graph().vertices();
    vs.push_back(pid);
    std::vector<GraphEdge> es;
    for (const auto& ge : m.graph().edges()) {
        if (ge.id != e.id) {
            es.push_back(ge);
            continue;
        }
        es.push_back(GraphEdge{ea, ge.u, pid, cut_off});
        es.push_back(GraphEdge{eb, pid, ge.v, ge.length - cut_off});
    }
    MapData d;
    d.graph = TopoGraph::make(std::move(vs), std::move(es));
    for (const auto& c : mp.cuts())
        if (c.id != pid) d.cuts.push_back({c.id, d.graph.normalized(reanchor(c.at))});
    for (int i = 0; i < mp.point_count(); ++i)
        d.point_images[mp.pid(i)] = d.graph.normalized(reanchor(image_point(m, i)));
    return PLMarkovMap::build(std::move(d));
}

Constructed wedge_power(const PLMarkovMap& m0, const std::string& fixed_pid, int k) {
    if (k < 1) throw DomainError("wedge_power requires k >= 1");
    {
        const MarkovPartition& mp = m0.partition();
        int idx = mp.pid_index(fixed_pid);
        if (m0.image_of(idx) != idx)
            throw DomainError("wedge_power: '" + fixed_pid + "' is not a fixed point");
    }
    if (k == 1) {
        Constructed c{m0, {}};
        c.trace.kind = "wedge_power";
        c.trace.notes.push_back("k=1: input returned unchanged");
        return c;
    }
    PLMarkovMap m = promote_cut_to_vertex(m0, fixed_pid);
    const MarkovPartition& mp = m.partition();
    const std::string hub = "w";

    auto copy_vertex = [&](int i, const std::string& v) -> std::string {
        return v == fixed_pid ? hub : "c" + std::to_string(i) + "." + v;
    };
    auto copy_point = [&](int i, const Point& p) -> Point {
        if (p.is_vertex()) return Point::at_vertex(copy_vertex(i, p.vertex));
        return Point::on_edge("c" + std::to_string(i) + "." + p.edge, p.offset);
    };

    std::vector<std::string> vs{hub};
    std::vector<GraphEdge> es;
    for (int i = 0; i < k; ++i) {
        for (const auto& v : m.graph().vertices())
            if (v != fixed_pid) vs.push_back(copy_vertex(i, v));
        for (const auto& e : m.graph().edges())
            es.push_back(GraphEdge{"c" + std::to_string(i) + "." + e.id, copy_vertex(i, e.u),
                                   copy_vertex(i, e.v), e.length});
    }
    MapData d;
    d.graph = TopoGraph::make(std::move(vs), std::move(es));
    for (int i = 0; i < k; ++i)
        for (const auto& c : mp.cuts())
            d.cuts.push_back({"c" + std::to_string(i) + "." + c.id, copy_point(i, c.at)});
    d.point_images[hub] = Point::at_vertex(hub);
    for (int i = 0; i < k; ++i) {
        for (int pидx = 0; pидx < mp.point_count(); ++pидx) {
            const std::string& name = mp.pid(pидx);
            if (name == fixed_pid) continue;
            std::string key = "c" + std::to_string(i) + "." + name;
            if (i < k - 1)
                d.point_images[key] = copy_point(i + 1, mp.point(pидx));
            else
                d.point_images[key] = copy_point(0, image_point(m, pидx));
        }
    }
    Constructed c{PLMarkovMap::build(std::move(d)), {}};
    c.trace.kind = "wedge_power";
    c.trace.orbit_size = k;
    c.trace.points.push_back({"hub", Point::at_vertex(hub)});
    return c;
}

Constructed edge_add(const PLMarkovMap& m0, const std::string& fixed_pid, const Rational& eps) {
    if (eps <= 0) throw DomainError("edge_add requires eps > 0");
    {
        int idx = m0.partition().pid_index(fixed_pid);
        if (m0.image_of(idx) != idx)
            throw DomainError("edge_add: '" + fixed_pid + "' is not a fixed point");
    }
    PLMarkovMap m = promote_cut_to_vertex(m0, fixed_pid);
    const MarkovPartition& mp = m.partition();
    int zpid = mp.pid_index(fixed_pid);
    EntropyEnclosure enc_in = entropy(m, eps / 16);
    if (!enc_in.converged) throw ResourceError("edge_add: input entropy did not converge");

    int iz = mp.intervals_at(zpid).front();
    const Interval& izv = mp.interval(iz);
    bool z_at_lo = izv.lo_pid == zpid;

    std::string last_info;
    for (long L = 4; L <= 512; L *= 2) {
        Pieces p = pieces_of(m);
        std::vector<std::string> vs = p.graph.vertices();
        vs.push_back("tip");
        std::vector<GraphEdge> es = p.graph.edges();
        es.push_back(GraphEdge{"add", fixed_pid, "tip", rat(1)});
        TopoGraph g2 = TopoGraph::make(std::move(vs), std::move(es));

        std::vector<CutPoint> cuts = p.cuts;
        for (long t = 1; t < L; ++t)
            cuts.push_back({"aq" + std::to_string(t), Point::on_edge("add", Rational(t, L))});
        Rational third = izv.length() / 3;
        Rational up_off = z_at_lo ? Rational(izv.lo + third) : Rational(izv.hi - third);
        Rational dn_off = z_at_lo ? Rational(izv.lo + 2 * third) : Rational(izv.hi - 2 * third);
        cuts.push_back({"aup", Point::on_edge(izv.edge, up_off)});
        cuts.push_back({"adn", Point::on_edge(izv.edge, dn_off)});

        std::map<std::string, Point> images = p.images;
        images["tip"] = Point::at_vertex("tip");
        images["aup"] = Point::at_vertex("tip");
        images["adn"] = Point::at_vertex(fixed_pid);
        for (long t = 1; t < L; ++t) {
            std::string id = "aq" + std::to_string(t);
            if (t == 1)
                images[id] = Point::on_edge(izv.edge, up_off);
            else
                images[id] = Point::on_edge("add", Rational(t - 1, L));
        }
        MapData d{g2, std::move(cuts), std::move(images), std::nullopt};
        PLMarkovMap out = PLMarkovMap::build(std::move(d));
        TransitivityResult tr = is_transitive(out);
        EntropyEnclosure enc_out = entropy(out, eps / 16);
        bool bound_ok = lv_cmp_offset(enc_in.lower, eps, enc_out.upper) > 0;
        if (tr.transitive && bound_ok) {
            Constructed c{out, {}};
            c.trace.kind = "edge_add";
            c.trace.L = L;
            c.trace.points.push_back({"entry_up", Point::on_edge(izv.edge, up_off)});
            c.trace.points.push_back({"entry_dn", Point::on_edge(izv.edge, dn_off)});
            for (long t = 1; t < L; ++t)
                c.trace.points.push_back(
                    {"chain" + std::to_string(t), Point::on_edge("add", Rational(t, L))});
            c.trace.has_entropies = true;
            c.trace.input_entropy = enc_in;
            c.trace.output_entropy = enc_out;
            return c;
        }
        last_info = "L=" + std::to_string(L) + " upper=" + lv_str(enc_out.upper) +
                    " transitive=" + (tr.transitive ? "yes" : "no");
    }
    throw ResourceError("edge_add: chain-length cap exceeded (" + last_info + ")");
}

namespace {

struct CentralData {
    int pid_p = -1;
    int n = 0;
    std::vector<int> central_intervals;  // I_0..I_{n-1}, class order
    std::vector<int> comp_of_pid;        // -1 for p
    int q_pid = -1;
    int q_interval = -1;
};

// Decomposition of a transitive, not totally transitive Markov tree map
// around its unique fixed point: the branch components at p are permuted
// cyclically; class 0 holds a partition point q != p with f(q) = p.
CentralData central_decomposition(const PLMarkovMap& m) {
    CentralData cd;
    const MarkovPartition& mp = m.partition();

    auto fixed = periodic_points(m, 1);
    std::vector<Point> fixed_pts;
    for (const auto& f : fixed) fixed_pts.push_back(f.at);
    if (fixed_pts.size() != 1)
        throw DomainError("expected a unique fixed point, found " +
                          std::to_string(fixed_pts.size()));
    cd.pid_p = mp.find_pid(fixed_pts[0]);
    if (cd.pid_p < 0) throw DomainError("fixed point is not a partition point");

    // components of the partition graph minus p
    cd.comp_of_pid.assign(mp.point_count(), -1);
    int ncomp = 0;
    for (int start = 0; start < mp.point_count(); ++start) {
        if (start == cd.pid_p || cd.comp_of_pid[start] != -1) continue;
        std::deque<int> q{start};
        cd.comp_of_pid[start] = ncomp;
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            for (int iv : mp.intervals_at(u)) {
                const Interval& i = mp.interval(iv);
                int w = i.lo_pid == u ? i.hi_pid : i.lo_pid;
                if (w == cd.pid_p || cd.comp_of_pid[w] != -1) continue;
                cd.comp_of_pid[w] = ncomp;
                q.push_back(w);
            }
        }
        ++ncomp;
    }
    cd.n = ncomp;
    if (cd.n < 2) throw DomainError("fixed point does not separate the tree");

    auto comp_of_interval = [&](int iv) {
        const Interval& i = mp.interval(iv);
        int other = i.lo_pid == cd.pid_p ? i.hi_pid : (i.hi_pid == cd.pid_p ? i.lo_pid : i.lo_pid);
        return cd.comp_of_pid[other];
    };

    std::vector<int> interval_at_p(cd.n, -1);
    for (int iv : mp.intervals_at(cd.pid_p)) {
        int c = comp_of_interval(iv);
        if (interval_at_p[c] != -1)
            throw DomainError("branch component touches the fixed point twice");
        interval_at_p[c] = c >= 0 ? iv : -1;
    }
    for (int c = 0; c < cd.n; ++c)
        if (interval_at_p[c] == -1) throw DomainError("missing central interval");

    auto next_comp = [&](int c) {
        int iv = interval_at_p[c];
        const Interval& i = mp.interval(iv);
        const auto& steps = m.path(iv);
        const PathStep& adj = i.lo_pid == cd.pid_p ? steps.front() : steps.back();
        return comp_of_interval(adj.interval);
    };

    // q: a partition point != p mapping onto p, with an interval off the
    // central star (the surgery interval must not carry chain points).
    for (int pid = 0; pid < mp.point_count() && cd.q_pid == -1; ++pid) {
        if (pid == cd.pid_p || m.image_of(pid) != cd.pid_p) continue;
        for (int iv : mp.intervals_at(pid)) {
            const Interval& i = mp.interval(iv);
            if (i.lo_pid == cd.pid_p || i.hi_pid == cd.pid_p) continue;
            cd.q_pid = pid;
            cd.q_interval = iv;
            break;
        }
    }
    if (cd.q_pid == -1)
        throw DomainError("no partition preimage of the fixed point off the central star");

    // order classes so that class 0 contains q and next() steps forward
    std::vector<int> order{cd.comp_of_pid[cd.q_pid]};
    for (int j = 1; j < cd.n; ++j) order.push_back(next_comp(order.back()));
    if (next_comp(order.back()) != order[0])
        throw DomainError("branch components are not permuted cyclically");
    {
        std::set<int> dedup(order.begin(), order.end());
        if ((int)dedup.size() != cd.n)
            throw DomainError("branch components are not permuted cyclically");
    }
    for (int c : order) cd.central_intervals.push_back(interval_at_p[c]);
    return cd;
}

}  // namespace

Constructed totalize(const PLMarkovMap& m0, const Rational& eps) {
    if (eps <= 0) throw DomainError("totalize requires eps > 0");
    if (!m0.graph().is_tree()) throw DomainError("totalize requires a tree map");
    Classification cls = classify(m0);
    if (!cls.transitive) throw DomainError("totalize requires a transitive map");
    if (cls.totally_transitive) throw DomainError("totalize: input is already totally transitive");

    const PLMarkovMap& m = m0;
    const MarkovPartition& mp = m.partition();
    CentralData cd = central_decomposition(m);
    int n = cd.n;

    EntropyEnclosure enc_in = entropy(m, eps / 32);
    if (!enc_in.converged) throw ResourceError("totalize: input entropy did not converge");
    Rational r = simplest_rational_log_between(enc_in.upper, enc_in.lower, eps);
    Rational s = simplest_rational_log_between(LogValue{r, 1}, enc_in.lower, eps);
    long lambda = least_power_with_margin(r, s);

    // j*: first class whose central interval covers more than the next one
    int jstar = -1;
    for (int j = 0; j < n; ++j)
        if (m.path(cd.central_intervals[j]).size() >= 2) {
            jstar = j;
            break;
        }
    if (jstar < 0) throw DomainError("totalize: central star is an isometric cycle");

    std::string last_info;
    for (int attempt = 0; attempt < 6; ++attempt) {
        long base = lambda << attempt;
        long L = base + (((jstar + 1 - base) % n) + n) % n;

        // exit target: the junction between the first two path entries of
        // I_{j*}, walked from the fixed-point side
        std::vector<Point> w(L + 1);
        {
            int iv = cd.central_intervals[jstar];
            const Interval& i = mp.interval(iv);
            const auto& steps = m.path(iv);
            const PathStep& adj = i.lo_pid == cd.pid_p ? steps.front() : steps.back();
            int junction = i.lo_pid == cd.pid_p
                               ? (adj.fwd ? mp.interval(adj.interval).hi_pid
                                          : mp.interval(adj.interval).lo_pid)
                               : (adj.fwd ? mp.interval(adj.interval).lo_pid
                                          : mp.interval(adj.interval).hi_pid);
            w[L] = mp.point(junction);
        }
        bool chain_ok = true;
        for (long t = L - 1; t >= 0; --t) {
            int iv = cd.central_intervals[t % n];
            w[t] = preimage_on_interval(m, iv, w[t + 1]);
            const Interval& i = mp.interval(iv);
            if (w[t].is_vertex() ||
                !(i.lo < w[t].offset && w[t].offset < i.hi && w[t].edge == i.edge)) {
                chain_ok = false;
                break;
            }
        }
        if (!chain_ok) {
            last_info = "chain left the central interiors at L=" + std::to_string(L);
            continue;
        }

        Pieces p = pieces_of(m);
        for (long t = 0; t < L; ++t) p.cuts.push_back({"tw" + std::to_string(t), w[t]});
        const Interval& qi = mp.interval(cd.q_interval);
        bool q_at_lo = qi.lo_pid == cd.q_pid;
        Rational third = qi.length() / 3;
        Rational yp_off = q_at_lo ? Rational(qi.lo + third) : Rational(qi.hi - third);
        Rational xp_off = q_at_lo ? Rational(qi.lo + 2 * third) : Rational(qi.hi - 2 * third);
        p.cuts.push_back({"typ", Point::on_edge(qi.edge, yp_off)});
        p.cuts.push_back({"txp", Point::on_edge(qi.edge, xp_off)});
        for (long t = 0; t < L; ++t)
            p.images["tw" + std::to_string(t)] = w[t + 1];
        p.images["typ"] = w[0];
        p.images["txp"] = mp.point(cd.pid_p);

        MapData d{p.graph, std::move(p.cuts), std::move(p.images), std::nullopt};
        PLMarkovMap out = PLMarkovMap::build(std::move(d));
        Classification ocls = classify(out);
        EntropyEnclosure enc_out = entropy(out, eps / 32);
        bool bound_ok = lv_cmp_offset(enc_in.lower, eps, enc_out.upper) > 0;
        if (ocls.totally_transitive && bound_ok) {
            Constructed c{out, {}};
            c.trace.kind = "totalize";
            c.trace.r = r;
            c.trace.s = s;
            c.trace.L = L;
            c.trace.Lambda = lambda;
            for (long t = 0; t < L; ++t)
                c.trace.points.push_back({"w" + std::to_string(t), w[t]});
            c.trace.points.push_back({"x'", Point::on_edge(qi.edge, xp_off)});
            c.trace.points.push_back({"y'", Point::on_edge(qi.edge, yp_off)});
            c.trace.points.push_back({"p", mp.point(cd.pid_p)});
            c.trace.points.push_back({"q", mp.point(cd.q_pid)});
            c.trace.has_entropies = true;
            c.trace.input_entropy = enc_in;
            c.trace.output_entropy = enc_out;
            return c;
        }
        last_info = "L=" + std::to_string(L) + " upper=" + lv_str(enc_out.upper) +
                    " totally_transitive=" + (ocls.totally_transitive ? "yes" : "no");
    }
    throw ResourceError("totalize: window cap exceeded (" + last_info + ")");
}

Constructed purify_stage(const PLMarkovMap& m, const PeriodicOrbitSpec& orbit, const Rational& eps,
                         int stage) {
    if (stage < 1) throw DomainError("purify_stage requires stage >= 1");
    if (eps <= 0) throw DomainError("purify_stage requires eps > 0");
    if (!m.graph().is_tree()) throw DomainError("purify_stage requires a tree map");
    Classification cls = classify(m);
    if (!cls.exact) throw DomainError("purify_stage requires an exact map");

    const MarkovPartition& mp = m.partition();
    int mu = (int)orbit.pids.size();
    if (mu < 1) throw DomainError("purify_stage: empty orbit");
    std::vector<int> opid(mu);
    PointCensus census = point_census(m.graph());
    for (int i = 0; i < mu; ++i) {
        opid[i] = mp.pid_index(orbit.pids[i]);
        const Point& pt = mp.point(opid[i]);
        if (!pt.is_vertex() || census.valence.at(pt.vertex) != 1)
            throw DomainError("purify_stage: orbit point '" + orbit.pids[i] +
                              "' is not an endpoint");
    }
    for (int i = 0; i < mu; ++i)
        if (m.image_of(opid[i]) != opid[(i + 1) % mu])
            throw DomainError("purify_stage: listed points are not a single cycle in order");

    std::vector<int> central(mu);  // I_i: the interval at endpoint o_i
    std::vector<int> zpid(mu);
    for (int i = 0; i < mu; ++i) {
        central[i] = mp.intervals_at(opid[i]).front();
        zpid[i] = far_end(mp, central[i], opid[i]);
    }

    // surgery interval [x, y]: f(x) = o_0, x != o_{mu-1}, off the orbit's
    // boundary intervals
    int q_pid = -1, q_interval = -1;
    for (int pid = 0; pid < mp.point_count() && q_pid == -1; ++pid) {
        if (pid == opid[(mu - 1 + mu) % mu]) continue;
        if (m.image_of(pid) != opid[0]) continue;
        for (int iv : mp.intervals_at(pid)) {
            if (std::find(central.begin(), central.end(), iv) != central.end()) continue;
            q_pid = pid;
            q_interval = iv;
            break;
        }
    }
    if (q_pid == -1) throw DomainError("purify_stage: no surgery interval available");

    EntropyEnclosure enc_in = entropy(m, eps / 32);
    if (!enc_in.converged) throw ResourceError("purify_stage: input entropy did not converge");
    LogValue eta_hi = lv_max(enc_in.upper, LogValue{Rational(3), (unsigned long)mu});
    LogValue eta_lo = lv_max(enc_in.lower, LogValue{Rational(3), (unsigned long)mu});
    Rational r = simplest_rational_log_between(eta_hi, eta_lo, eps);
    Rational s = simplest_rational_log_between(LogValue{r, 1}, eta_lo, eps);
    long lambda = least_power_with_margin(r, s);

    std::string last_info;
    for (int attempt = 0; attempt < 4; ++attempt) {
        long L = lambda << attempt;
        BigInt sevenL;
        mpz_ui_pow_ui(sevenL.get_mpz_t(), 7, (unsigned long)L);

        auto arc_edge = [&](int i) { return "orb" + std::to_string(i); };
        auto A = [&](int t) { return Rational(1, BigInt(1) << t); };  // 2^-t from the leaf
        auto gap = [&](int t) { return Rational(1, BigInt(1) << t); };  // g_t = 2^-t
        // u-front coords A_t + 7^k g_t / 7^L, w-front coords A_{t-1} - 7^k g_t / 7^L
        auto chi = [&](int t, long k) {
            BigInt sk;
            mpz_ui_pow_ui(sk.get_mpz_t(), 7, (unsigned long)k);
            return Rational(A(t) + gap(t) * Rational(sk, sevenL));
        };
        auto omega = [&](int t, long k) {
            BigInt sk;
            mpz_ui_pow_ui(sk.get_mpz_t(), 7, (unsigned long)k);
            return Rational(A(t - 1) - gap(t) * Rational(sk, sevenL));
        };
        Rational tail_w = A(stage) - gap(stage + 1) / Rational(sevenL);

        Pieces p = pieces_of(m);
        std::vector<std::string> vs = p.graph.vertices();
        std::vector<GraphEdge> es = p.graph.edges();
        for (int i = 0; i < mu; ++i) {
            vs.push_back("inf" + std::to_string(i));
            es.push_back(
                GraphEdge{arc_edge(i), "inf" + std::to_string(i), mp.point(opid[i]).vertex, rat(1)});
        }
        TopoGraph g2 = TopoGraph::make(std::move(vs), std::move(es));

        auto cut_id = [&](const std::string& base, int i) { return base + "@" + std::to_string(i); };
        std::vector<CutPoint> cuts = p.cuts;
        std::map<std::string, Point> images = p.images;

        for (int i = 0; i < mu; ++i) {
            std::string e = arc_edge(i);
            int nx = (i + 1) % mu;
            std::string ne = arc_edge(nx);
            bool folding = i == mu - 1;
            auto shift = [&](const Rational& off) { return Point::on_edge(ne, off); };

            images["inf" + std::to_string(i)] = Point::at_vertex("inf" + std::to_string(nx));
            for (int t = 1; t <= stage; ++t) {
                cuts.push_back({cut_id("pa" + std::to_string(t), i), Point::on_edge(e, A(t))});
                images[cut_id("pa" + std::to_string(t), i)] =
                    folding ? Point::on_edge(ne, A(t)) : shift(A(t));
                for (long k = 0; k < L; ++k) {
                    std::string cu = cut_id("pu" + std::to_string(t) + "." + std::to_string(k), i);
                    cuts.push_back({cu, Point::on_edge(e, chi(t, k))});
                    if (!folding)
                        images[cu] = shift(chi(t, k));
                    else
                        images[cu] = k < L - 1 ? Point::on_edge(ne, chi(t, k + 1))
                                               : Point::on_edge(ne, A(t - 1));
                    std::string cw = cut_id("pv" + std::to_string(t) + "." + std::to_string(k), i);
                    cuts.push_back({cw, Point::on_edge(e, omega(t, k))});
                    if (!folding)
                        images[cw] = shift(omega(t, k));
                    else
                        images[cw] = k < L - 1 ? Point::on_edge(ne, omega(t, k + 1))
                                               : Point::on_edge(ne, A(t));
                }
                if (folding) {
                    Rational g = gap(t);
                    cuts.push_back(
                        {cut_id("pb" + std::to_string(t), i), Point::on_edge(e, A(t) + 2 * g / 7)});
                    cuts.push_back({cut_id("pc" + std::to_string(2 * t), i),
                                    Point::on_edge(e, A(t) + 3 * g / 7)});
                    cuts.push_back({cut_id("pe" + std::to_string(2 * t), i),
                                    Point::on_edge(e, A(t) + 4 * g / 7)});
                    cuts.push_back(
                        {cut_id("pd" + std::to_string(t), i), Point::on_edge(e, A(t) + 5 * g / 7)});
                    // b_t -> u_{t-1} (t>=2 a front start, t==1 the tree chain point, set below)
                    if (t >= 2)
                        images[cut_id("pb" + std::to_string(t), i)] =
                            Point::on_edge(ne, chi(t - 1, 0));
                    images[cut_id("pc" + std::to_string(2 * t), i)] = Point::on_edge(ne, A(t - 1));
                    images[cut_id("pe" + std::to_string(2 * t), i)] = Point::on_edge(ne, A(t));
                    images[cut_id("pd" + std::to_string(t), i)] =
                        Point::on_edge(ne, A(t) - gap(t + 1) / Rational(sevenL));
                }
            }
            cuts.push_back({cut_id("pw", i), Point::on_edge(e, tail_w)});
            images[cut_id("pw", i)] = Point::on_edge(ne, tail_w);
        }

        // the escape chain in the old tree: xi[mu*L] = z_0, pulled back
        // through the boundary intervals
        long chain_len = (long)mu * L;
        std::vector<Point> xi(chain_len + 1);
        xi[chain_len] = mp.point(zpid[0]);
        for (long t = chain_len - 1; t >= 0; --t)
            xi[t] = preimage_on_interval(m, central[t % mu], xi[t + 1]);
        for (long t = 0; t < chain_len; ++t) {
            int existing = mp.find_pid(xi[t]);
            if (existing >= 0) {
                if (!(image_point(m, existing) == m.graph().normalized(xi[t + 1])))
                    throw DomainError("purify_stage: chain point image mismatch");
                continue;
            }
            std::string id = "pt" + std::to_string(t);
            cuts.push_back({id, xi[t]});
            images[id] = xi[t + 1];
        }
        // b_1 on the folding arc targets the chain start u_0
        images[cut_id("pb1", mu - 1)] = xi[0];

        const Interval& qi = mp.interval(q_interval);
        bool q_at_lo = qi.lo_pid == q_pid;
        Rational third = qi.length() / 3;
        Rational yp_off = q_at_lo ? Rational(qi.lo + third) : Rational(qi.hi - third);
        Rational xp_off = q_at_lo ? Rational(qi.lo + 2 * third) : Rational(qi.hi - 2 * third);
        cuts.push_back({"pyp", Point::on_edge(qi.edge, yp_off)});
        cuts.push_back({"pxp", Point::on_edge(qi.edge, xp_off)});
        images["pyp"] = Point::on_edge(arc_edge(0), omega(1, 0));  // w_0
        images["pxp"] = mp.point(opid[0]);

        MapData d{g2, std::move(cuts), std::move(images), std::nullopt};
        PLMarkovMap out = PLMarkovMap::build(std::move(d));
        EntropyEnclosure enc_out = entropy(out, eps / 32);
        bool bound_ok = lv_cmp_offset(eta_lo, eps, enc_out.upper) > 0;
        if (bound_ok) {
            Constructed c{out, {}};
            c.trace.kind = "purify_stage";
            c.trace.r = r;
            c.trace.s = s;
            c.trace.L = L;
            c.trace.Lambda = lambda;
            c.trace.stage = stage;
            c.trace.orbit_size = mu;
            c.trace.orbit = orbit.pids;
            std::string fold_edge = arc_edge(mu - 1);
            for (int t = 1; t <= stage; ++t) {
                c.trace.points.push_back({"a" + std::to_string(t),
                                          Point::on_edge(fold_edge, A(t))});
                c.trace.points.push_back({"b" + std::to_string(t),
                                          Point::on_edge(fold_edge, A(t) + 2 * gap(t) / 7)});
                c.trace.points.push_back({"c" + std::to_string(2 * t - 1),
                                          Point::on_edge(fold_edge, chi(t, L - 1))});
                c.trace.points.push_back({"c" + std::to_string(2 * t),
                                          Point::on_edge(fold_edge, A(t) + 3 * gap(t) / 7)});
                c.trace.points.push_back({"e" + std::to_string(2 * t),
                                          Point::on_edge(fold_edge, A(t) + 4 * gap(t) / 7)});
                c.trace.points.push_back({"d" + std::to_string(t),
                                          Point::on_edge(fold_edge, A(t) + 5 * gap(t) / 7)});
                c.trace.points.push_back({"e" + std::to_string(2 * t - 1),
                                          Point::on_edge(fold_edge, omega(t, L - 1))});
                c.trace.points.push_back({"u" + std::to_string(t),
                                          Point::on_edge(arc_edge(0), chi(t, 0))});
                c.trace.points.push_back({"w" + std::to_string(t - 1),
                                          Point::on_edge(arc_edge(0), omega(t, 0))});
            }
            c.trace.points.push_back({"u0", xi[0]});
            c.trace.points.push_back({"x'", Point::on_edge(qi.edge, xp_off)});
            c.trace.points.push_back({"y'", Point::on_edge(qi.edge, yp_off)});
            c.trace.has_entropies = true;
            c.trace.input_entropy = enc_in;
            c.trace.output_entropy = enc_out;
            return c;
        }
        last_info = "L=" + std::to_string(L) + " upper=" + lv_str(enc_out.upper);
    }
    throw ResourceError("purify_stage: window cap exceeded (" + last_info + ")");
}

StarExact star_exact(int n, const Rational& eps) {
    if (n < 2) throw DomainError("star_exact requires n >= 2");
    if (eps <= 0) throw DomainError("star_exact requires eps > 0");
    Constructed base = tent3();
    Constructed wedge = wedge_power(base.map, "0", n);
    Constructed total = totalize(wedge.map, eps);
    StarExact out{std::move(total), {}};
    for (int i = 0; i < n; ++i) out.endpoint_cycle.push_back("c" + std::to_string(i) + ".1");
    out.built.trace.kind = "star_exact";
    out.built.trace.orbit = out.endpoint_cycle;
    out.built.trace.orbit_size = n;
    return out;
}

BinaryExact binary_exact(int n, const Rational& eps) {
    if (n < 1) throw DomainError("binary_exact requires n >= 1");
    if (eps <= 0) throw DomainError("binary_exact requires eps > 0");
    if (n == 1) {
        Constructed base = b1_base();
        Constructed total = totalize(base.map, eps);
        BinaryExact out{std::move(total), {"0", "1"}, ""};
        // the central root is the fixed cut at the midpoint
        const MarkovPartition& mp = out.built.map.partition();
        out.central_root = mp.pid(mp.find_pid(Point::on_edge("a", rat(1, 2))));
        out.built.trace.kind = "binary_exact";
        out.built.trace.orbit = out.endpoint_cycle;
        return out;
    }
    Rational e3 = eps / 3;
    BinaryExact prev = binary_exact(n - 1, e3);
    Constructed grown = edge_add(prev.built.map, prev.central_root, e3);
    Constructed wedged = wedge_power(grown.map, "tip", 2);
    Constructed total = totalize(wedged.map, e3);
    BinaryExact out{std::move(total), {}, "w"};
    for (const auto& e : prev.endpoint_cycle) {
        out.endpoint_cycle.push_back("c0." + e);
        out.endpoint_cycle.push_back("c1." + e);
    }
    out.built.trace.kind = "binary_exact";
    out.built.trace.orbit = out.endpoint_cycle;
    return out;
}

namespace {

// Transfers a tree map through a vertex identification: edges, cut points
// and interval ids are unchanged, so image paths carry over verbatim.
PLMarkovMap quotient_map(const PLMarkovMap& tree_map, const Quotient& q,
                         const std::vector<std::vector<std::string>>& classes) {
    MapData td = tree_map.to_data();
    for (const auto& cls : classes) {
        std::set<Point> images;
        for (const auto& v : cls) images.insert(q.project(td.point_images.at(v)));
        if (images.size() != 1)
            throw DomainError("identification image-consistency failure");
    }
    MapData d;
    d.graph = q.graph;
    d.cuts = td.cuts;
    for (const auto& [pid, img] : td.point_images) {
        std::string key = pid;
        auto it = q.vertex_projection.find(pid);
        if (it != q.vertex_projection.end()) key = it->second;
        d.point_images[key] = q.project(img);
    }
    d.paths = td.paths;
    return PLMarkovMap::build(std::move(d));
}

}  // namespace

QuotientExample quotient_example(const std::string& name, const Rational& eps, int stage) {
    if (eps <= 0) throw DomainError("quotient_example requires eps > 0");
    Constructed built{tent3().map, {}};
    std::vector<std::string> cycle;
    LogValue target;

    if (name == "sigma") {
        Rational e3 = eps / 3;
        Constructed t1 = totalize(b1_base().map, e3);
        const MarkovPartition& mp = t1.map.partition();
        std::string root = mp.pid(mp.find_pid(Point::on_edge("a", rat(1, 2))));
        Constructed t2 = edge_add(t1.map, root, e3);
        cycle = {"0", "1"};
        built = purify_stage(t2.map, PeriodicOrbitSpec{cycle, true}, e3, stage);
        target = LogValue{Rational(3), 2};
    } else if (name == "theta") {
        StarExact s = star_exact(3, eps / 2);
        cycle = s.endpoint_cycle;
        built = purify_stage(s.built.map, PeriodicOrbitSpec{cycle, true}, eps / 2, stage);
        target = LogValue{Rational(3), 3};
    } else if (name == "figure8") {
        StarExact s = star_exact(4, eps / 2);
        cycle = s.endpoint_cycle;
        built = purify_stage(s.built.map, PeriodicOrbitSpec{cycle, true}, eps / 2, stage);
        target = LogValue{Rational(3), 4};
    } else if (name == "dumbbell") {
        BinaryExact b = binary_exact(2, eps / 2);
        cycle = b.endpoint_cycle;
        built = purify_stage(b.built.map, PeriodicOrbitSpec{cycle, true}, eps / 2, stage);
        target = LogValue{Rational(3), 4};
    } else {
        throw DomainError("unknown quotient example '" + name + "'");
    }

    int mu = (int)cycle.size();
    std::vector<std::vector<std::string>> classes;
    if (name == "sigma") {
        classes = {{"inf0", "inf1"}};
    } else if (name == "theta") {
        classes = {{"inf0", "inf1", "inf2"}};
    } else {
        classes = {{"inf0", "inf2"}, {"inf1", "inf3"}};
    }
    Quotient q = identify_points(built.map.graph(), classes);
    PLMarkovMap qm = quotient_map(built.map, q, classes);

    QuotientExample out{name, q.graph, qm, built.map, classes, {}, built.trace, target, eps};
    for (const auto& cls : classes) {
        std::string rep = *std::min_element(cls.begin(), cls.end());
        for (const auto& leaf : cls) {
            int i = std::stoi(leaf.substr(3));
            out.nacc.push_back(Side{rep, "orb" + std::to_string(i), 0});
        }
    }
    (void)mu;
    return out;
}

Point UnfoldResult::project(const Point& p) const {
    if (!p.is_vertex()) return p;
    auto it = vertex_projection.find(p.vertex);
    return Point::at_vertex(it == vertex_projection.end() ? p.vertex : it->second);
}

namespace {

// The edge-end side adjacent to a path's entry into/out of a vertex.
std::optional<Side> side_of_step(const TopoGraph& g, const MarkovPartition& mp,
                                 const PathStep& step, bool at_start) {
    const Interval& j = mp.interval(step.interval);
    const GraphEdge& e = g.edge(j.edge);
    bool enters_at_lo = at_start ? step.fwd : !step.fwd;
    if (enters_at_lo) {
        if (j.lo != 0) return std::nullopt;
        return Side{e.u, e.id, 0};
    }
    if (j.hi != e.length) return std::nullopt;
    return Side{e.v, e.id, 1};
}

}  // namespace

UnfoldResult unfold(const TopoGraph& g, const PLMarkovMap& m, const std::vector<Side>& nacc) {
    const MarkovPartition& mp = m.partition();
    std::set<Side> declared(nacc.begin(), nacc.end());

    // the boundary interval of a side, and its induced image side
    auto side_interval = [&](const Side& s) -> int {
        const GraphEdge& e = g.edge(s.edge);
        if ((s.end == 0 ? e.u : e.v) != s.vertex)
            throw DomainError("side does not match the edge end");
        const auto& ivs = mp.edge_intervals(s.edge);
        return s.end == 0 ? ivs.front() : ivs.back();
    };
    auto side_image = [&](const Side& s) -> Side {
        int iv = side_interval(s);
        const Interval& i = mp.interval(iv);
        bool at_lo = s.end == 0;  // side vertex sits at the lo end iff end == 0
        const auto& steps = m.path(iv);
        const PathStep& adj = at_lo ? steps.front() : steps.back();
        auto out = side_of_step(g, mp, adj, at_lo);
        if (!out) throw DomainError("image of an inaccessible side is not an edge end");
        return *out;
    };

    std::map<Side, Side> sigma;
    for (const auto& s : nacc) {
        Side t = side_image(s);
        if (!declared.count(t))
            throw DomainError("declared sides are not closed under the side map");
        sigma[s] = t;
    }

    UnfoldResult res;
    std::map<Side, std::string> det_name;
    int serial = 0;
    for (const auto& s : nacc) det_name[s] = "det" + std::to_string(serial++);

    std::vector<GraphEdge> edges;
    for (const auto& e : g.edges()) {
        GraphEdge ne = e;
        auto u_side = declared.find(Side{e.u, e.id, 0});
        if (u_side != declared.end()) ne.u = det_name[*u_side];
        auto v_side = declared.find(Side{e.v, e.id, 1});
        if (v_side != declared.end()) ne.v = det_name[*v_side];
        edges.push_back(ne);
    }
    std::set<std::string> vset;
    for (const auto& e : edges) {
        vset.insert(e.u);
        vset.insert(e.v);
    }
    TopoGraph g2 = TopoGraph::make(std::vector<std::string>(vset.begin(), vset.end()), edges);

    for (const auto& [s, d] : det_name) {
        res.vertex_projection[d] = s.vertex;
        res.detached_endpoints.push_back(d);
    }
    for (const auto& v : g.vertices())
        if (g2.has_vertex(v)) res.vertex_projection[v] = v;

    std::set<std::string> split_vertices;
    for (const auto& s : nacc) split_vertices.insert(s.vertex);

    // lift of the image of a partition point, resolved through the side its
    // neighborhood arrives at
    auto lift_image = [&](int pid) -> Point {
        Point img = mp.point(m.image_of(pid));
        if (!img.is_vertex() || !split_vertices.count(img.vertex)) return img;
        std::optional<std::string> choice;
        for (int iv : mp.intervals_at(pid)) {
            const Interval& i = mp.interval(iv);
            bool at_lo = i.lo_pid == pid;
            const auto& steps = m.path(iv);
            const PathStep& adj = at_lo ? steps.front() : steps.back();
            auto side = side_of_step(g, mp, adj, at_lo);
            std::string cand;
            if (side && declared.count(*side))
                cand = det_name[*side];
            else
                cand = img.vertex;
            if (choice && *choice != cand)
                throw DomainError("lifted image is ambiguous at '" + mp.pid(pid) + "'");
            choice = cand;
        }
        if (!choice) throw DomainError("no intervals at partition point");
        if (*choice != img.vertex && !g2.has_vertex(img.vertex)) return Point::at_vertex(*choice);
        return Point::at_vertex(*choice);
    };

    MapData md = m.to_data();
    MapData d;
    d.graph = g2;
    d.cuts = md.cuts;
    for (int pid = 0; pid < mp.point_count(); ++pid) {
        const Point& pt = mp.point(pid);
        if (pt.is_vertex() && !g2.has_vertex(pt.vertex)) continue;  // fully detached vertex
        d.point_images[mp.pid(pid)] = lift_image(pid);
    }
    for (const auto& [s, dn] : det_name) {
        const Side& t = sigma.at(s);
        d.point_images[dn] = Point::at_vertex(det_name.at(t));
    }
    d.paths = md.paths;
    res.graph = g2;
    res.map = PLMarkovMap::build(std::move(d));  // continuity failures surface here

    // verification: semiconjugacy on partition points plus sampled points
    const MarkovPartition& mp2 = res.map.partition();
    bool ok = true;
    for (int pid = 0; pid < mp2.point_count(); ++pid) {
        Point up = res.project(mp2.point(pid));
        Point lhs = res.project(res.map.evaluate(mp2.point(pid)));
        Point rhs = m.evaluate(up);
        if (!(g.normalized(lhs) == g.normalized(rhs))) ok = false;
    }
    unsigned long state = 0x9e3779b97f4a7c15ull;
    auto next_rand = [&]() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return state;
    };
    long samples = 1000;
    for (long i = 0; i < samples; ++i) {
        const auto& es = g2.edges();
        const GraphEdge& e = es[next_rand() % es.size()];
        long den = 997;
        long num = (long)(next_rand() % (unsigned long)(den - 1)) + 1;
        Point x = Point::on_edge(e.id, e.length * Rational(num, den));
        Point lhs = res.project(res.map.evaluate(x));
        Point rhs = m.evaluate(res.project(x));
        if (!(g.normalized(lhs) == g.normalized(rhs))) ok = false;
    }
    res.semiconjugacy_ok = ok;
    res.samples_checked = samples;
    res.nacc_bound_ok = (int)nacc.size() < kappa(g);

    bool unique_ok = true;
    for (const auto& dn : res.detached_endpoints) {
        int target = mp2.pid_index(dn);
        int count = 0;
        for (int pid = 0; pid < mp2.point_count(); ++pid)
            if (res.map.image_of(pid) == target) ++count;
        if (count != 1) unique_ok = false;
    }
    res.unique_preimage_ok = unique_ok;
    return res;
}

}  // namespace graphdyn
