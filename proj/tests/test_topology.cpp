#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "kinemaforge/error.hpp"
#include "kinemaforge/topology.hpp"
#include "test_support.hpp"

using namespace kf;

namespace {

// Exhaustive-minimum reference: Prim on the dense weight matrix, kept
// deliberately different from the library's Kruskal implementation.
double prim_cost(const Eigen::MatrixXd& w) {
  const int n = static_cast<int>(w.rows());
  std::vector<bool> in(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  best[0] = 0.0;
  double total = 0.0;
  for (int step = 0; step < n; ++step) {
    int pick = -1;
    for (int v = 0; v < n; ++v) {
      if (!in[v] && (pick < 0 || best[v] < best[pick])) pick = v;
    }
    in[pick] = true;
    total += best[pick];
    for (int v = 0; v < n; ++v) {
      if (!in[v] && w(pick, v) < best[v]) best[v] = w(pick, v);
    }
  }
  return total;
}

double edge_cost(const std::vector<WeightedEdge>& edges) {
  double total = 0.0;
  for (const WeightedEdge& e : edges) total += e.w;
  return total;
}

bool has_edge(const std::vector<WeightedEdge>& edges, int a, int b) {
  return std::any_of(edges.begin(), edges.end(), [&](const WeightedEdge& e) {
    return (e.a == a && e.b == b) || (e.a == b && e.b == a);
  });
}

// Four clusters in two parts; part 1 slides along +x while part 0 rests.
ClusterTrack two_part_track() {
  ClusterTrack track;
  track.poses.assign(3, std::vector<Pose>(4));
  for (int t = 0; t < 3; ++t) {
    track.poses[t][0].position = {0.0, 0.0, 0.0};
    track.poses[t][1].position = {0.0, 1.0, 0.0};
    track.poses[t][2].position = {4.0 + 0.5 * t, 0.0, 0.0};
    track.poses[t][3].position = {4.0 + 0.5 * t, 1.0, 0.0};
  }
  return track;
}

const std::vector<int> kTwoPartLabels = {0, 0, 1, 1};

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("part distance graph hand oracle") {
  std::vector<ClusterTrack> tracks = {two_part_track()};
  std::vector<WeightedEdge> graph =
      part_distance_graph(tracks, kTwoPartLabels, 2);
  REQUIRE(graph.size() == 1);
  CHECK(graph[0].a == 0);
  CHECK(graph[0].b == 1);
  // Part centroids per frame: part 0 at (0, 0.5, 0), part 1 at
  // (4 + 0.5 t, 0.5, 0); distances 4, 4.5, 5 sum to 13.5.
  CHECK(graph[0].w == doctest::Approx(13.5).epsilon(1e-12));

  // A second identical sequence doubles the accumulated weight.
  tracks.push_back(two_part_track());
  std::vector<WeightedEdge> doubled =
      part_distance_graph(tracks, kTwoPartLabels, 2);
  REQUIRE(doubled.size() == 1);
  CHECK(doubled[0].w == doctest::Approx(27.0).epsilon(1e-12));
}

TEST_CASE("part distance graph is complete") {
  ClusterTrack track;
  track.poses.assign(2, std::vector<Pose>(3));
  for (int t = 0; t < 2; ++t) {
    track.poses[t][0].position = {0.0, 0.0, 0.0};
    track.poses[t][1].position = {1.0 + 0.1 * t, 0.0, 0.0};
    track.poses[t][2].position = {0.0, 2.0 + 0.2 * t, 0.0};
  }
  std::vector<WeightedEdge> graph =
      part_distance_graph({track}, {0, 1, 2}, 3);
  CHECK(graph.size() == 3);  // all pairs of 3 parts
  CHECK(has_edge(graph, 0, 1));
  CHECK(has_edge(graph, 0, 2));
  CHECK(has_edge(graph, 1, 2));
}

TEST_CASE("minimum spanning tree hand case") {
  std::vector<WeightedEdge> graph = {
      {0, 1, 1.0}, {0, 2, 4.0}, {0, 3, 3.0},
      {1, 2, 2.0}, {1, 3, 5.0}, {2, 3, 6.0},
  };
  std::vector<WeightedEdge> mst = build_mst(4, graph);
  REQUIRE(mst.size() == 3);
  CHECK(edge_cost(mst) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(has_edge(mst, 0, 1));
  CHECK(has_edge(mst, 1, 2));
  CHECK(has_edge(mst, 0, 3));
}

TEST_CASE("minimum spanning tree matches exhaustive minimum") {
  Rng rng(402);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform(0.0, 4.0));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    std::vector<WeightedEdge> graph;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double d = 0.05 + rng.uniform(0.0, 1.0);
        w(i, j) = w(j, i) = d;
        graph.push_back({i, j, d});
      }
    }
    std::vector<WeightedEdge> mst = build_mst(n, graph);
    REQUIRE(mst.size() == static_cast<std::size_t>(n - 1));

    // Spanning: union the edges and confirm a single component.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int v) {
      return parent[v] == v ? v : parent[v] = find(parent[v]);
    };
    for (const WeightedEdge& e : mst) parent[find(e.a)] = find(e.b);
    for (int v = 0; v < n; ++v) CHECK(find(v) == find(0));

    CHECK(edge_cost(mst) == doctest::Approx(prim_cost(w)).epsilon(1e-9));
  }
}

TEST_CASE("minimum spanning tree tie break is deterministic") {
  // All weights equal on K4: ordering by (weight, a, b) keeps the star at 0.
  std::vector<WeightedEdge> graph;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) graph.push_back({i, j, 1.0});
  }
  std::vector<WeightedEdge> mst = build_mst(4, graph);
  REQUIRE(mst.size() == 3);
  CHECK(mst[0].a == 0);
  CHECK(mst[0].b == 1);
  CHECK(mst[1].a == 0);
  CHECK(mst[1].b == 2);
  CHECK(mst[2].a == 0);
  CHECK(mst[2].b == 3);
}

TEST_CASE("minimum spanning tree rejects disconnected graphs") {
  std::vector<WeightedEdge> graph = {{0, 1, 1.0}, {2, 3, 1.0}};
  CHECK_THROWS_AS(build_mst(4, graph), Error);
}

TEST_CASE("root selection prefers the least moving part") {
  std::vector<ClusterTrack> tracks = {two_part_track()};
  CHECK(select_root(tracks, kTwoPartLabels, 2) == 0);

  // Swap which part moves: clusters 0/1 slide instead.
  ClusterTrack swapped;
  swapped.poses.assign(3, std::vector<Pose>(4));
  for (int t = 0; t < 3; ++t) {
    swapped.poses[t][0].position = {0.5 * t, 0.0, 0.0};
    swapped.poses[t][1].position = {0.5 * t, 1.0, 0.0};
    swapped.poses[t][2].position = {4.0, 0.0, 0.0};
    swapped.poses[t][3].position = {4.0, 1.0, 0.0};
  }
  CHECK(select_root({swapped}, kTwoPartLabels, 2) == 1);

  // Exact tie (nothing moves at all) -> lowest part id.
  ClusterTrack still;
  still.poses.assign(2, std::vector<Pose>(4));
  for (int t = 0; t < 2; ++t) {
    still.poses[t][0].position = {0.0, 0.0, 0.0};
    still.poses[t][1].position = {0.0, 1.0, 0.0};
    still.poses[t][2].position = {4.0, 0.0, 0.0};
    still.poses[t][3].position = {4.0, 1.0, 0.0};
  }
  CHECK(select_root({still}, kTwoPartLabels, 2) == 0);
}

TEST_CASE("topology inference on two parts") {
  std::vector<WeightedEdge> edges = {{0, 1, 13.5}};
  KinematicTree tree = infer_topology(2, edges, 0, kTwoPartLabels);
  CHECK(tree.root == 0);
  REQUIRE(tree.links.size() == 2);
  CHECK(tree.links[0].id == 0);
  CHECK(tree.links[0].parent == -1);
  CHECK(tree.links[1].parent == 0);
  CHECK(tree.links[0].clusters == std::vector<int>{0, 1});
  CHECK(tree.links[1].clusters == std::vector<int>{2, 3});

  std::vector<std::pair<int, int>> pairs = tree.edges();
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::pair<int, int>(0, 1));
  CHECK(tree.children_of(0) == std::vector<int>{1});
  CHECK(tree.children_of(1).empty());
}

TEST_CASE("topology inference orients edges away from the root") {
  // Chain 0-1-2 rooted at the middle: both ends become children of 1.
  std::vector<WeightedEdge> edges = {{0, 1, 1.0}, {1, 2, 1.0}};
  std::vector<int> labels = {0, 1, 2};
  KinematicTree tree = infer_topology(3, edges, 1, labels);
  CHECK(tree.root == 1);
  CHECK(tree.links[0].parent == 1);
  CHECK(tree.links[1].parent == -1);
  CHECK(tree.links[2].parent == 1);
  CHECK(tree.children_of(1) == std::vector<int>{0, 2});

  // Same chain rooted at one end nests the other two.
  KinematicTree chain = infer_topology(3, edges, 0, labels);
  CHECK(chain.links[1].parent == 0);
  CHECK(chain.links[2].parent == 1);
}

TEST_CASE("topology inference rejects cycles and islands") {
  std::vector<int> labels = {0, 1, 2};
  std::vector<WeightedEdge> cycle = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}};
  CHECK_THROWS_AS(infer_topology(3, cycle, 0, labels), Error);

  std::vector<WeightedEdge> island = {{0, 1, 1.0}};
  CHECK_THROWS_AS(infer_topology(3, island, 0, labels), Error);
}

TEST_CASE("topology round trip") {
  kftest::TempDir tmp("topology");
  std::vector<WeightedEdge> edges = {{0, 1, 2.0}, {1, 2, 1.0}};
  KinematicTree tree = infer_topology(3, edges, 1, {0, 0, 1, 2, 2});
  save_topology(tmp.path / "tree.json", tree);
  KinematicTree back = load_topology(tmp.path / "tree.json");
  CHECK(back.root == tree.root);
  REQUIRE(back.links.size() == tree.links.size());
  for (std::size_t i = 0; i < tree.links.size(); ++i) {
    CHECK(back.links[i].id == tree.links[i].id);
    CHECK(back.links[i].parent == tree.links[i].parent);
    CHECK(back.links[i].clusters == tree.links[i].clusters);
  }
}

}  // TEST_SUITE
