#include "kinemaforge/topology.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "kinemaforge/error.hpp"

using json = nlohmann::ordered_json;

namespace kf {

namespace {

// Part centroids per frame for one track (mean of member cluster positions).
std::vector<std::vector<Eigen::Vector3d>> part_centroids(
    const ClusterTrack& track, const std::vector<int>& labels, int part_count) {
  const std::size_t T = track.frame_count();
  std::vector<std::vector<Eigen::Vector3d>> out(
      T, std::vector<Eigen::Vector3d>(static_cast<std::size_t>(part_count),
                                      Eigen::Vector3d::Zero()));
  std::vector<int> counts(static_cast<std::size_t>(part_count), 0);
  for (int l : labels) counts[static_cast<std::size_t>(l)]++;
  for (int p = 0; p < part_count; ++p) {
    if (counts[static_cast<std::size_t>(p)] == 0) {
      throw Error(ErrorCode::ShapeMismatch,
                  "part " + std::to_string(p) + " has no clusters");
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < labels.size(); ++c) {
      out[t][static_cast<std::size_t>(labels[c])] +=
          track.poses[t][c].position;
    }
    for (int p = 0; p < part_count; ++p) {
      out[t][static_cast<std::size_t>(p)] /=
          static_cast<double>(counts[static_cast<std::size_t>(p)]);
    }
  }
  return out;
}

}  // namespace

std::vector<WeightedEdge> part_distance_graph(
    const std::vector<ClusterTrack>& tracks, const std::vector<int>& labels,
    int part_count) {
  if (tracks.empty()) {
    throw Error(ErrorCode::EmptySequence, "part graph: no tracks");
  }
  std::vector<WeightedEdge> edges;
  for (int a = 0; a < part_count; ++a) {
    for (int b = a + 1; b < part_count; ++b) {
      edges.push_back({a, b, 0.0});
    }
  }
  for (const auto& track : tracks) {
    auto cent = part_centroids(track, labels, part_count);
    std::size_t e = 0;
    for (int a = 0; a < part_count; ++a) {
      for (int b = a + 1; b < part_count; ++b, ++e) {
        for (std::size_t t = 0; t < cent.size(); ++t) {
          edges[e].w += (cent[t][static_cast<std::size_t>(a)] -
                         cent[t][static_cast<std::size_t>(b)])
                            .norm();
        }
      }
    }
  }
  return edges;
}

std::vector<WeightedEdge> build_mst(int n, std::vector<WeightedEdge> edges) {
  std::sort(edges.begin(), edges.end(),
            [](const WeightedEdge& x, const WeightedEdge& y) {
              if (x.w != y.w) return x.w < y.w;
              if (x.a != y.a) return x.a < y.a;
              return x.b < y.b;
            });
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  std::vector<WeightedEdge> mst;
  for (const auto& e : edges) {
    int ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    mst.push_back(e);
    if (static_cast<int>(mst.size()) == n - 1) break;
  }
  if (static_cast<int>(mst.size()) != n - 1) {
    throw Error(ErrorCode::DegenerateTrack, "part graph is disconnected");
  }
  return mst;
}

int select_root(const std::vector<ClusterTrack>& tracks,
                const std::vector<int>& labels, int part_count) {
  std::vector<double> motion(static_cast<std::size_t>(part_count), 0.0);
  for (const auto& track : tracks) {
    auto cent = part_centroids(track, labels, part_count);
    for (std::size_t t = 1; t < cent.size(); ++t) {
      for (int p = 0; p < part_count; ++p) {
        motion[static_cast<std::size_t>(p)] +=
            (cent[t][static_cast<std::size_t>(p)] -
             cent[0][static_cast<std::size_t>(p)])
                .norm();
      }
    }
  }
  int best = 0;
  for (int p = 1; p < part_count; ++p) {
    if (motion[static_cast<std::size_t>(p)] < motion[static_cast<std::size_t>(best)]) {
      best = p;
    }
  }
  return best;
}

std::vector<std::pair<int, int>> KinematicTree::edges() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& link : links) {
    if (link.parent >= 0) out.emplace_back(link.parent, link.id);
  }
  return out;
}

std::vector<int> KinematicTree::children_of(int id) const {
  std::vector<int> out;
  for (const auto& link : links) {
    if (link.parent == id) out.push_back(link.id);
  }
  return out;
}

KinematicTree infer_topology(int part_count,
                             const std::vector<WeightedEdge>& edges, int root,
                             const std::vector<int>& labels) {
  if (root < 0 || root >= part_count) {
    throw Error(ErrorCode::InvalidConfig, "topology: root out of range");
  }
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(part_count));
  for (const auto& e : edges) {
    adj[static_cast<std::size_t>(e.a)].push_back(e.b);
    adj[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());

  KinematicTree tree;
  tree.root = root;
  tree.links.resize(static_cast<std::size_t>(part_count));
  for (int p = 0; p < part_count; ++p) {
    tree.links[static_cast<std::size_t>(p)].id = p;
    tree.links[static_cast<std::size_t>(p)].parent = -1;
  }
  for (std::size_t c = 0; c < labels.size(); ++c) {
    tree.links[static_cast<std::size_t>(labels[c])].clusters.push_back(
        static_cast<int>(c));
  }

  // Layer-by-layer parent assignment; visiting an already-assigned node via a
  // second edge means the connectivity has a cycle.
  std::vector<bool> visited(static_cast<std::size_t>(part_count), false);
  visited[static_cast<std::size_t>(root)] = true;
  std::deque<int> frontier{root};
  int reached = 1;
  while (!frontier.empty()) {
    int cur = frontier.front();
    frontier.pop_front();
    for (int nb : adj[static_cast<std::size_t>(cur)]) {
      if (nb == tree.links[static_cast<std::size_t>(cur)].parent) continue;
      if (visited[static_cast<std::size_t>(nb)]) {
        throw Error(ErrorCode::CyclicConnectivity,
                    "parts " + std::to_string(cur) + " and " +
                        std::to_string(nb) + " connect through multiple paths");
      }
      visited[static_cast<std::size_t>(nb)] = true;
      tree.links[static_cast<std::size_t>(nb)].parent = cur;
      frontier.push_back(nb);
      ++reached;
    }
  }
  if (reached != part_count) {
    throw Error(ErrorCode::DegenerateTrack,
                "topology: graph leaves parts unreachable from the root");
  }
  return tree;
}

void save_topology(const std::filesystem::path& path, const KinematicTree& tree) {
  json j;
  j["root"] = tree.root;
  json links = json::array();
  for (const auto& link : tree.links) {
    links.push_back(json{{"id", link.id},
                         {"parent", link.parent},
                         {"clusters", link.clusters}});
  }
  j["links"] = std::move(links);
  json edges = json::array();
  for (const auto& [a, b] : tree.edges()) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

KinematicTree load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    json j;
    in >> j;
    KinematicTree tree;
    tree.root = j.at("root").get<int>();
    for (const auto& l : j.at("links")) {
      KinematicTree::Link link;
      link.id = l.at("id").get<int>();
      link.parent = l.at("parent").get<int>();
      link.clusters = l.at("clusters").get<std::vector<int>>();
      tree.links.push_back(std::move(link));
    }
    return tree;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace kf
