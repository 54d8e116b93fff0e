#include "graphdyn/markov.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <set>

#include "graphdyn/errors.hpp"

namespace graphdyn {

std::string ValidationReport::summary() const {
    if (valid) return "valid";
    std::string s = "invalid:";
    for (const auto& i : issues) s += " [" + i.code + "] " + i.message + ";";
    return s;
}

MarkovPartition::MarkovPartition(TopoGraph graph, std::vector<CutPoint> cuts)
    : graph_(std::move(graph)), cuts_(std::move(cuts)) {
    std::sort(cuts_.begin(), cuts_.end(), [](const CutPoint& a, const CutPoint& b) {
        if (a.at.edge != b.at.edge) return a.at.edge < b.at.edge;
        return a.at.offset < b.at.offset;
    });
    for (const auto& v : graph_.vertices()) {
        pid_index_[v] = (int)pids_.size();
        pids_.push_back(v);
        points_.push_back(Point::at_vertex(v));
    }
    for (const auto& c : cuts_) {
        Point p = graph_.normalized(c.at);
        if (p.is_vertex())
            throw DomainError("cut point '" + c.id + "' coincides with vertex " + p.vertex);
        if (pid_index_.count(c.id)) throw DomainError("duplicate partition id '" + c.id + "'");
        pid_index_[c.id] = (int)pids_.size();
        pids_.push_back(c.id);
        points_.push_back(p);
    }
    for (int i = 0; i < (int)points_.size(); ++i) {
        if (point_index_.count(points_[i]))
            throw DomainError("duplicate cut point at " + point_str(points_[i]));
        point_index_[points_[i]] = i;
    }
    at_point_.resize(points_.size());
    for (const auto& e : graph_.edges()) {
        std::vector<std::pair<Rational, int>> cuts_on_edge;  // (offset, pid)
        for (int i = 0; i < (int)points_.size(); ++i)
            if (!points_[i].is_vertex() && points_[i].edge == e.id)
                cuts_on_edge.push_back({points_[i].offset, i});
        std::sort(cuts_on_edge.begin(), cuts_on_edge.end());
        std::vector<std::pair<Rational, int>> stops;
        stops.push_back({Rational(0), pid_index_.at(e.u)});
        for (auto& c : cuts_on_edge) stops.push_back(c);
        stops.push_back({e.length, pid_index_.at(e.v)});
        for (int k = 0; k + 1 < (int)stops.size(); ++k) {
            Interval iv;
            iv.id = e.id + "#" + std::to_string(k);
            iv.edge = e.id;
            iv.lo = stops[k].first;
            iv.hi = stops[k + 1].first;
            iv.lo_pid = stops[k].second;
            iv.hi_pid = stops[k + 1].second;
            int idx = (int)intervals_.size();
            interval_index_[iv.id] = idx;
            per_edge_[e.id].push_back(idx);
            at_point_[iv.lo_pid].push_back(idx);
            at_point_[iv.hi_pid].push_back(idx);
            intervals_.push_back(std::move(iv));
        }
    }
}

int MarkovPartition::pid_index(const std::string& id) const {
    auto it = pid_index_.find(id);
    if (it == pid_index_.end()) throw DomainError("unknown partition point id '" + id + "'");
    return it->second;
}

int MarkovPartition::find_pid(const Point& p) const {
    auto it = point_index_.find(graph_.normalized(p));
    return it == point_index_.end() ? -1 : it->second;
}

int MarkovPartition::interval_index(const std::string& id) const {
    auto it = interval_index_.find(id);
    if (it == interval_index_.end()) throw DomainError("unknown interval id '" + id + "'");
    return it->second;
}

int MarkovPartition::interval_at(const std::string& edge, const Rational& off) const {
    auto it = per_edge_.find(edge);
    if (it == per_edge_.end()) throw DomainError("unknown edge id '" + edge + "'");
    for (int idx : it->second)
        if (intervals_[idx].lo <= off && off <= intervals_[idx].hi) return idx;
    throw DomainError("offset " + rat_str(off) + " outside edge '" + edge + "'");
}

const std::vector<int>& MarkovPartition::edge_intervals(const std::string& edge) const {
    auto it = per_edge_.find(edge);
    if (it == per_edge_.end()) throw DomainError("unknown edge id '" + edge + "'");
    return it->second;
}

std::vector<PathStep> tree_geodesic(const MarkovPartition& mp, int from_pid, int to_pid) {
    if (from_pid == to_pid) return {};
    std::vector<int> prev_point(mp.point_count(), -1);
    std::vector<int> prev_interval(mp.point_count(), -1);
    std::deque<int> queue{from_pid};
    prev_point[from_pid] = from_pid;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        if (u == to_pid) break;
        for (int idx : mp.intervals_at(u)) {
            const Interval& iv = mp.interval(idx);
            int w = iv.lo_pid == u ? iv.hi_pid : iv.lo_pid;
            if (prev_point[w] != -1) continue;
            prev_point[w] = u;
            prev_interval[w] = idx;
            queue.push_back(w);
        }
    }
    if (prev_point[to_pid] == -1) throw DomainError("partition points are not connected");
    std::vector<PathStep> steps;
    for (int w = to_pid; w != from_pid; w = prev_point[w]) {
        const Interval& iv = mp.interval(prev_interval[w]);
        steps.push_back(PathStep{prev_interval[w], iv.hi_pid == w});
    }
    std::reverse(steps.begin(), steps.end());
    return steps;
}

namespace {

struct BuildResult {
    ValidationReport report;
    std::shared_ptr<MarkovPartition> partition;
    std::vector<int> images;
    std::vector<std::vector<PathStep>> paths;
};

BuildResult build_impl(const MapData& d) {
    BuildResult r;
    auto issue = [&](const std::string& code, const std::string& msg) {
        r.report.valid = false;
        r.report.issues.push_back({code, msg});
    };
    try {
        r.partition = std::make_shared<MarkovPartition>(d.graph, d.cuts);
    } catch (const DomainError& e) {
        issue("partition", e.what());
        return r;
    }
    const MarkovPartition& mp = *r.partition;

    r.images.assign(mp.point_count(), -1);
    for (const auto& [id, img] : d.point_images) {
        int pid;
        try {
            pid = mp.pid_index(id);
        } catch (const DomainError&) {
            issue("markov", "image given for unknown partition point '" + id + "'");
            continue;
        }
        Point p;
        try {
            p = mp.graph().normalized(img);
        } catch (const DomainError& e) {
            issue("markov", std::string(e.what()) + " (image of '" + id + "')");
            continue;
        }
        int target = mp.find_pid(p);
        if (target < 0) {
            issue("markov", "image of '" + id + "' is " + point_str(p) +
                                ", not a partition point");
            continue;
        }
        r.images[pid] = target;
    }
    for (int i = 0; i < mp.point_count(); ++i)
        if (r.images[i] < 0) issue("markov", "no image for partition point '" + mp.pid(i) + "'");
    if (!r.report.valid) return r;

    // Image paths: given explicitly, or derived as tree geodesics.
    r.paths.assign(mp.interval_count(), {});
    if (d.paths) {
        std::set<std::string> seen;
        for (const auto& [iid, steps] : *d.paths) {
            int idx;
            try {
                idx = mp.interval_index(iid);
            } catch (const DomainError&) {
                issue("paths", "path given for unknown interval '" + iid + "'");
                continue;
            }
            seen.insert(iid);
            for (const auto& s : steps) {
                try {
                    r.paths[idx].push_back(PathStep{mp.interval_index(s.interval), s.fwd});
                } catch (const DomainError&) {
                    issue("paths", "path of '" + iid + "' uses unknown interval '" + s.interval + "'");
                }
            }
        }
        for (int i = 0; i < mp.interval_count(); ++i)
            if (!seen.count(mp.interval(i).id))
                issue("paths", "no image path for interval '" + mp.interval(i).id + "'");
        if (!r.report.valid) return r;
    } else {
        if (!mp.graph().is_tree()) {
            issue("paths", "image paths are required on graphs with circles");
            return r;
        }
        for (int i = 0; i < mp.interval_count(); ++i) {
            const Interval& iv = mp.interval(i);
            r.paths[i] = tree_geodesic(mp, r.images[iv.lo_pid], r.images[iv.hi_pid]);
        }
    }

    for (int i = 0; i < mp.interval_count(); ++i) {
        const Interval& iv = mp.interval(i);
        const auto& steps = r.paths[i];
        if (steps.empty()) {
            issue("collapse", "interval '" + iv.id + "' collapses to a point");
            continue;
        }
        // continuity with the endpoint images, walking the chain of points
        int at = steps.front().fwd ? mp.interval(steps.front().interval).lo_pid
                                   : mp.interval(steps.front().interval).hi_pid;
        if (at != r.images[iv.lo_pid])
            issue("continuity", "path of '" + iv.id + "' starts at '" + mp.pid(at) +
                                    "', image of its endpoint is '" +
                                    mp.pid(r.images[iv.lo_pid]) + "'");
        std::vector<int> visited{at};
        bool chain_ok = true;
        for (const auto& s : steps) {
            const Interval& si = mp.interval(s.interval);
            int in = s.fwd ? si.lo_pid : si.hi_pid;
            int out = s.fwd ? si.hi_pid : si.lo_pid;
            if (in != at) {
                issue("continuity", "path of '" + iv.id + "' breaks at '" + si.id + "'");
                chain_ok = false;
                break;
            }
            at = out;
            visited.push_back(at);
        }
        if (!chain_ok) continue;
        if (at != r.images[iv.hi_pid])
            issue("continuity", "path of '" + iv.id + "' ends at '" + mp.pid(at) +
                                    "', image of its endpoint is '" +
                                    mp.pid(r.images[iv.hi_pid]) + "'");
        std::set<int> uniq(visited.begin(), visited.end());
        if (uniq.size() != visited.size())
            issue("monotone", "path of '" + iv.id + "' revisits a point (not a simple arc)");
    }
    return r;
}

}  // namespace

ValidationReport PLMarkovMap::validate(const MapData& d) { return build_impl(d).report; }

PLMarkovMap PLMarkovMap::build(MapData d) {
    BuildResult r = build_impl(d);
    if (!r.report.valid) throw DomainError("map validation failed: " + r.report.summary());
    PLMarkovMap m;
    m.partition_ = std::move(r.partition);
    m.images_ = std::move(r.images);
    m.paths_ = std::move(r.paths);
    return m;
}

Rational PLMarkovMap::path_length(int interval) const {
    Rational s = 0;
    for (const auto& st : paths_[interval]) s += partition_->interval(st.interval).length();
    return s;
}

Rational PLMarkovMap::expansion(int interval) const {
    return path_length(interval) / partition_->interval(interval).length();
}

int PLMarkovMap::interval_containing(const Point& p) const {
    Point q = graph().normalized(p);
    if (q.is_vertex()) return partition_->intervals_at(partition_->find_pid(q)).front();
    return partition_->interval_at(q.edge, q.offset);
}

Point PLMarkovMap::evaluate(const Point& p) const {
    const MarkovPartition& mp = *partition_;
    Point q = graph().normalized(p);
    int pid = mp.find_pid(q);
    if (pid >= 0) return mp.point(images_[pid]);
    int idx = mp.interval_at(q.edge, q.offset);
    const Interval& iv = mp.interval(idx);
    Rational t = q.offset - iv.lo;
    Rational d = t * expansion(idx);
    Rational acc = 0;
    for (const auto& st : paths_[idx]) {
        const Interval& si = mp.interval(st.interval);
        Rational len = si.length();
        if (d <= acc + len) {
            Rational local = d - acc;
            Rational off = st.fwd ? Rational(si.lo + local) : Rational(si.hi - local);
            return graph().normalized(Point::on_edge(si.edge, off));
        }
        acc += len;
    }
    // arithmetic guarantees d <= total path length; final step catches d == total
    const PathStep& st = paths_[idx].back();
    const Interval& si = mp.interval(st.interval);
    return graph().normalized(Point::on_edge(si.edge, st.fwd ? si.hi : si.lo));
}

Point PLMarkovMap::evaluate_n(const Point& p, long n) const {
    Point q = graph().normalized(p);
    for (long i = 0; i < n; ++i) q = evaluate(q);
    return q;
}

MapData PLMarkovMap::to_data() const {
    MapData d;
    d.graph = partition_->graph();
    d.cuts = partition_->cuts();
    for (int i = 0; i < partition_->point_count(); ++i)
        d.point_images[partition_->pid(i)] = partition_->point(images_[i]);
    std::map<std::string, std::vector<IdStep>> paths;
    for (int i = 0; i < partition_->interval_count(); ++i) {
        std::vector<IdStep> steps;
        for (const auto& st : paths_[i])
            steps.push_back(IdStep{partition_->interval(st.interval).id, st.fwd});
        paths[partition_->interval(i).id] = std::move(steps);
    }
    d.paths = std::move(paths);
    return d;
}

}  // namespace graphdyn
