#include "kinemaforge/meshing.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "kinemaforge/error.hpp"
#include "kinemaforge/parallel.hpp"

namespace fs = std::filesystem;

namespace kf {

PointCloud accumulate_link_cloud(const std::vector<ClusterTrack>& tracks,
                                 const std::vector<FrameSequence>& sequences,
                                 const KinematicTree& tree,
                                 const LinkPoseTrack& link_track, int link) {
  if (tracks.size() != sequences.size()) {
    throw Error(ErrorCode::ShapeMismatch, "accumulate: tracks vs sequences");
  }
  std::vector<bool> member(tracks[0].cluster_count(), false);
  for (int c : tree.links[static_cast<std::size_t>(link)].clusters) {
    member[static_cast<std::size_t>(c)] = true;
  }

  PointCloud out;
  std::size_t row = 0;  // concatenated frame index in link_track
  for (std::size_t s = 0; s < tracks.size(); ++s) {
    const ClusterTrack& track = tracks[s];
    const FrameSequence& seq = sequences[s];
    if (track.frame_count() != seq.frames.size()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "accumulate: track/sequence frame counts differ");
    }
    std::size_t t0 = s == 0 ? 0 : 1;  // later tracks share frame 0
    for (std::size_t t = t0; t < track.frame_count(); ++t, ++row) {
      Transform3D inv =
          pose_to_transform(link_track.poses[row][static_cast<std::size_t>(link)])
              .inverse();
      const auto& labels = track.memberships[t].labels;
      const auto& frame = seq.frames[t];
      for (std::size_t i = 0; i < frame.size(); ++i) {
        if (member[static_cast<std::size_t>(labels[i])]) {
          out.pts.push_back(inv.apply(frame.pts[i]));
        }
      }
    }
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptySurface,
                "link " + std::to_string(link) + " accumulated no points");
  }
  return out;
}

VoxelGrid distance_grid(const PointCloud& cloud, const MeshingConfig& cfg) {
  if (cloud.empty()) throw Error(ErrorCode::EmptySurface, "distance grid: empty cloud");
  if (cfg.resolution < 2 || cfg.pad_cells < 1) {
    throw Error(ErrorCode::InvalidConfig, "distance grid: bad resolution/pad");
  }
  Bbox b = bbox(cloud);
  Eigen::Vector3d extent = b.max - b.min;
  double longest = extent.maxCoeff();
  if (longest <= 0.0) {
    throw Error(ErrorCode::DegenerateCloud, "distance grid: cloud has no extent");
  }
  double cell = longest / cfg.resolution;

  VoxelGrid grid;
  grid.cell = cell;
  grid.origin = b.min - cfg.pad_cells * cell * Eigen::Vector3d::Ones();
  for (int a = 0; a < 3; ++a) {
    int ncells = std::max(1, static_cast<int>(std::ceil(extent[a] / cell - 1e-9)));
    grid.npts[a] = ncells + 1 + 2 * cfg.pad_cells;
  }
  grid.values.resize(static_cast<std::size_t>(grid.npts.x()) * grid.npts.y() *
                     grid.npts.z());

  KdTree tree(cloud);
  double trunc = cfg.truncation_factor * cell;
  parallel_for(static_cast<std::size_t>(grid.npts.z()), [&](std::size_t kz) {
    int k = static_cast<int>(kz);
    for (int j = 0; j < grid.npts.y(); ++j) {
      for (int i = 0; i < grid.npts.x(); ++i) {
        Eigen::Vector3d p = grid.origin + cell * Eigen::Vector3d(i, j, k);
        double d = tree.nearest_l2(p).distance;
        grid.at(i, j, k) = std::min(d, trunc);
      }
    }
  });
  return grid;
}

TriangleMesh marching_cubes(const VoxelGrid& grid, double iso) {
  const int nx = grid.npts.x(), ny = grid.npts.y(), nz = grid.npts.z();
  if (nx < 2 || ny < 2 || nz < 2) {
    throw Error(ErrorCode::InvalidConfig, "marching cubes: grid too small");
  }
  const auto& table = mc_case_table();

  TriangleMesh mesh;
  // Vertex id per global lattice edge: edge = (point index, axis).
  std::vector<int> edge_vertex(grid.values.size() * 3, -1);
  auto point_index = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        int config = 0;
        double corner_val[8];
        for (int c = 0; c < 8; ++c) {
          double v = grid.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          corner_val[c] = v;
          if (v < iso) config |= 1 << c;
        }
        const auto& tris = table[static_cast<std::size_t>(config)];
        if (tris.empty()) continue;

        int cell_vertex[12];
        for (int e = 0; e < 12; ++e) cell_vertex[e] = -1;
        auto vertex_for_edge = [&](int e) {
          if (cell_vertex[e] >= 0) return cell_vertex[e];
          int base = mc_edge_base(e);
          int axis = mc_edge_axis(e);
          int bi = i + (base & 1);
          int bj = j + ((base >> 1) & 1);
          int bk = k + ((base >> 2) & 1);
          std::size_t key = point_index(bi, bj, bk) * 3 +
                            static_cast<std::size_t>(axis);
          int id = edge_vertex[key];
          if (id < 0) {
            double v0 = corner_val[base];
            double v1 = corner_val[base | (1 << axis)];
            double t = (iso - v0) / (v1 - v0);
            Eigen::Vector3d pos =
                grid.origin + grid.cell * Eigen::Vector3d(bi, bj, bk);
            pos[axis] += t * grid.cell;
            id = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(pos);
            edge_vertex[key] = id;
          }
          cell_vertex[e] = id;
          return id;
        };

        for (std::size_t t = 0; t + 2 < tris.size(); t += 3) {
          mesh.triangles.push_back({vertex_for_edge(tris[t]),
                                    vertex_for_edge(tris[t + 1]),
                                    vertex_for_edge(tris[t + 2])});
        }
      }
    }
  }
  return mesh;
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(mesh.triangles.size() * 3);
  auto key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  for (const auto& tri : mesh.triangles) {
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) return false;
    for (int e = 0; e < 3; ++e) {
      if (++count[key(tri[e], tri[(e + 1) % 3])] > 1) return false;
    }
  }
  for (const auto& [k, c] : count) {
    int a = static_cast<int>(k >> 32);
    int b = static_cast<int>(k & 0xffffffffu);
    auto rev = count.find(key(b, a));
    if (rev == count.end() || rev->second != 1 || c != 1) return false;
  }
  return true;
}

double mesh_volume(const TriangleMesh& mesh) {
  double vol = 0.0;
  for (const auto& tri : mesh.triangles) {
    const Eigen::Vector3d& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Eigen::Vector3d& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Eigen::Vector3d& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    vol += a.dot(b.cross(c));
  }
  return std::abs(vol) / 6.0;
}

PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n,
                               Rng& rng) {
  if (mesh.triangles.empty()) {
    throw Error(ErrorCode::EmptySurface, "surface sampling: no triangles");
  }
  std::vector<double> cum(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector3d& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Eigen::Vector3d& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Eigen::Vector3d& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    total += 0.5 * ((b - a).cross(c - a)).norm();
    cum[t] = total;
  }
  if (total <= 0.0) {
    throw Error(ErrorCode::EmptySurface, "surface sampling: zero area");
  }
  PointCloud out;
  out.pts.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    double u = rng.uniform() * total;
    std::size_t t = static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (t >= cum.size()) t = cum.size() - 1;
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector3d& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Eigen::Vector3d& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Eigen::Vector3d& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    double r1 = rng.uniform();
    double r2 = rng.uniform();
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    out.pts.push_back(a + r1 * (b - a) + r2 * (c - a));
  }
  return out;
}

void save_obj(const fs::path& path, const TriangleMesh& mesh) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& v : mesh.vertices) {
    std::fprintf(f, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
  }
  for (const auto& t : mesh.triangles) {
    std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
  }
  std::fclose(f);
}

TriangleMesh load_obj(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::ParseError,
                path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("v ", 0) == 0) {
      Eigen::Vector3d p;
      const char* s = line.c_str() + 2;
      const char* end = line.c_str() + line.size();
      for (int k = 0; k < 3; ++k) {
        while (s < end && std::isspace(static_cast<unsigned char>(*s))) ++s;
        auto [next, ec] = std::from_chars(s, end, p[k]);
        if (ec != std::errc()) fail("bad vertex");
        s = next;
      }
      mesh.vertices.push_back(p);
    } else if (line.rfind("f ", 0) == 0) {
      std::array<int, 3> idx{};
      const char* s = line.c_str() + 2;
      const char* end = line.c_str() + line.size();
      for (int k = 0; k < 3; ++k) {
        while (s < end && std::isspace(static_cast<unsigned char>(*s))) ++s;
        auto [next, ec] = std::from_chars(s, end, idx[static_cast<std::size_t>(k)]);
        if (ec != std::errc()) fail("bad face");
        s = next;
        // Only plain vertex indices are produced by save_obj.
        if (s < end && *s == '/') fail("unsupported face format");
      }
      while (s < end && std::isspace(static_cast<unsigned char>(*s))) ++s;
      if (s != end) fail("faces must be triangles");
      for (auto& v : idx) {
        if (v < 1 || static_cast<std::size_t>(v) > mesh.vertices.size()) {
          fail("face index out of range");
        }
        v -= 1;
      }
      mesh.triangles.push_back(idx);
    } else {
      fail("unsupported record");
    }
  }
  return mesh;
}

}  // namespace kf
