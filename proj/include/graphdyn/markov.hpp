#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graphdyn/graph.hpp"

namespace graphdyn {

// An extra cut point (edge-interior) of the Markov partition. Vertices are
// partition points implicitly, named by their vertex id.
struct CutPoint {
    std::string id;
    Point at;
};

struct IdStep {
    std::string interval;
    bool fwd = true;  // traversal from lower to higher offset
};

// Raw map description prior to validation. When `paths` is absent and the
// base graph is a tree, image paths are derived as geodesics between the
// endpoint images.
struct MapData {
    TopoGraph graph;
    std::vector<CutPoint> cuts;
    std::map<std::string, Point> point_images;
    std::optional<std::map<std::string, std::vector<IdStep>>> paths;
};

struct Issue {
    std::string code;     // "markov", "continuity", "monotone", "collapse", ...
    std::string message;
};

struct ValidationReport {
    bool valid = true;
    std::vector<Issue> issues;
    std::string summary() const;
};

struct Interval {
    std::string id;  // "<edge>#<k>", k ascending by offset
    std::string edge;
    Rational lo, hi;
    int lo_pid = -1, hi_pid = -1;
    Rational length() const { return hi - lo; }
};

class MarkovPartition {
  public:
    MarkovPartition(TopoGraph graph, std::vector<CutPoint> cuts);

    const TopoGraph& graph() const { return graph_; }
    const std::vector<CutPoint>& cuts() const { return cuts_; }

    int point_count() const { return (int)points_.size(); }
    const std::string& pid(int i) const { return pids_[i]; }
    const Point& point(int i) const { return points_[i]; }
    int pid_index(const std::string& id) const;
    int find_pid(const Point& p) const;  // -1 when p is not a partition point

    int interval_count() const { return (int)intervals_.size(); }
    const Interval& interval(int i) const { return intervals_[i]; }
    int interval_index(const std::string& id) const;
    // Interval whose closure contains (edge, off); boundary offsets resolve
    // to the lower interval.
    int interval_at(const std::string& edge, const Rational& off) const;
    const std::vector<int>& intervals_at(int pid) const { return at_point_[pid]; }
    const std::vector<int>& edge_intervals(const std::string& edge) const;

  private:
    TopoGraph graph_;
    std::vector<CutPoint> cuts_;
    std::vector<std::string> pids_;
    std::vector<Point> points_;
    std::map<std::string, int> pid_index_;
    std::map<Point, int> point_index_;
    std::vector<Interval> intervals_;
    std::map<std::string, int> interval_index_;
    std::map<std::string, std::vector<int>> per_edge_;
    std::vector<std::vector<int>> at_point_;
};

struct PathStep {
    int interval = -1;
    bool fwd = true;
};

// Validated piecewise-linear Markov self-map. Immutable; all operations are
// pure.
class PLMarkovMap {
  public:
    static ValidationReport validate(const MapData& d);
    static PLMarkovMap build(MapData d);  // throws DomainError when invalid

    const MarkovPartition& partition() const { return *partition_; }
    const TopoGraph& graph() const { return partition_->graph(); }
    int image_of(int pid) const { return images_[pid]; }
    const std::vector<PathStep>& path(int interval) const { return paths_[interval]; }
    Rational path_length(int interval) const;
    Rational expansion(int interval) const;  // per-interval slope magnitude

    Point evaluate(const Point& p) const;
    Point evaluate_n(const Point& p, long n) const;
    // Index of an interval containing p (boundary points resolve low).
    int interval_containing(const Point& p) const;

    // Canonical data (explicit paths, cuts sorted by position).
    MapData to_data() const;

  private:
    PLMarkovMap() = default;
    std::shared_ptr<const MarkovPartition> partition_;
    std::vector<int> images_;
    std::vector<std::vector<PathStep>> paths_;
};

// Geodesic between two partition points of a tree partition, as path steps.
// Empty when from == to.
std::vector<PathStep> tree_geodesic(const MarkovPartition& mp, int from_pid, int to_pid);

}  // namespace graphdyn
