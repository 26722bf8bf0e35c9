#pragma once

#include <filesystem>
#include <vector>

#include "kinemaforge/registration.hpp"

namespace kf {

struct WeightedEdge {
  int a = 0, b = 0;
  double w = 0.0;
};

// Complete graph over parts: edge weight is the part-centroid distance
// accumulated over every frame of every track (parts that stay close through
// the whole motion are likely physically connected).  Part centroid at frame
// t = mean of its member cluster positions.
std::vector<WeightedEdge> part_distance_graph(
    const std::vector<ClusterTrack>& tracks, const std::vector<int>& labels,
    int part_count);

// Kruskal MST with deterministic tie-breaks (weight, then endpoint indices).
// Throws DegenerateTrack if the graph does not connect all n nodes.
std::vector<WeightedEdge> build_mst(int n, std::vector<WeightedEdge> edges);

// The base part: smallest accumulated centroid displacement from frame 0
// (ties toward the lowest part id).
int select_root(const std::vector<ClusterTrack>& tracks,
                const std::vector<int>& labels, int part_count);

struct KinematicTree {
  struct Link {
    int id = 0;
    int parent = -1;  // -1 for the root
    std::vector<int> clusters;
  };
  int root = 0;
  std::vector<Link> links;  // indexed by part id

  std::vector<std::pair<int, int>> edges() const;  // (parent, child) pairs
  std::vector<int> children_of(int id) const;
};

// Turns an edge list + root into a parent-assigned tree by breadth-first
// traversal.  Reaching a node twice means the edges contain a cycle
// (CyclicConnectivity); unreachable nodes mean a disconnected graph
// (DegenerateTrack).  clusters lists per link come from `labels`.
KinematicTree infer_topology(int part_count,
                             const std::vector<WeightedEdge>& edges, int root,
                             const std::vector<int>& labels);

void save_topology(const std::filesystem::path& path, const KinematicTree& tree);
KinematicTree load_topology(const std::filesystem::path& path);

}  // namespace kf
