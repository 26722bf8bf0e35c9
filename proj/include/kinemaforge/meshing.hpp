#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/joints.hpp"
#include "kinemaforge/pointcloud.hpp"
#include "kinemaforge/rng.hpp"

namespace kf {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;
};

struct MeshingConfig {
  int resolution = 64;            // cells along the longest bbox axis
  double truncation_factor = 1.5; // distance clamp, in cells
  int pad_cells = 3;              // bbox inflation so the surface closes
  double iso_factor = 1.0;        // iso level, in cells
};

// Scalar samples on a regular lattice of (nx, ny, nz) points; cell edges have
// length `cell` and the lattice point (0,0,0) sits at `origin`.
struct VoxelGrid {
  Eigen::Vector3i npts = Eigen::Vector3i::Zero();
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double cell = 0.0;
  std::vector<double> values;

  double& at(int i, int j, int k) {
    return values[static_cast<std::size_t>((k * npts.y() + j) * npts.x() + i)];
  }
  double at(int i, int j, int k) const {
    return values[static_cast<std::size_t>((k * npts.y() + j) * npts.x() + i)];
  }
};

// All points ever observed on one link, expressed in the link's frame: every
// frame's member points (of the link's clusters) pulled back through that
// frame's link pose.  Sequences must parallel the tracks they produced.
PointCloud accumulate_link_cloud(const std::vector<ClusterTrack>& tracks,
                                 const std::vector<FrameSequence>& sequences,
                                 const KinematicTree& tree,
                                 const LinkPoseTrack& link_track, int link);

// Truncated unsigned distance field to the cloud.  Cell size = longest bbox
// extent / resolution; values clamp at truncation_factor * cell; the lattice
// pads the bbox by pad_cells on every side so the iso surface never reaches
// the boundary.  Throws EmptySurface / DegenerateCloud.
VoxelGrid distance_grid(const PointCloud& cloud, const MeshingConfig& cfg);

// Table-driven marching cubes over the grid ("inside" = value < iso).  Cells
// are visited in lexicographic order (x fastest) and vertices are welded by
// their global lattice edge, so output is deterministic.  The case tables
// pair ambiguous faces by a rule that depends only on the face's corner
// signs, which both adjacent cells share, so the mesh is closed and
// consistently oriented by construction.
TriangleMesh marching_cubes(const VoxelGrid& grid, double iso);

// Case tables for the 256 corner-sign configurations: flat triangle lists of
// cell-edge ids (triples).  Generated once, on first use.
const std::array<std::vector<std::int8_t>, 256>& mc_case_table();
// Cell edge numbering shared by the table and the mesher: edges 0-3 run along
// x, 4-7 along y, 8-11 along z; mc_edge_base(e) is the corner (bit0 = x,
// bit1 = y, bit2 = z) the edge starts from, mc_edge_axis(e) its direction.
int mc_edge_base(int edge);
int mc_edge_axis(int edge);

// Closed orientable surface check: every directed edge appears exactly once
// and its reverse exists (so each undirected edge bounds exactly two
// consistently wound triangles).  Empty meshes are not watertight.
bool is_watertight(const TriangleMesh& mesh);

// Total volume enclosed by the mesh (absolute value of the signed sum of
// tetrahedra against the origin).
double mesh_volume(const TriangleMesh& mesh);

// Area-weighted uniform surface sampling.  Throws EmptySurface when the mesh
// has no area.
PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng);

// Wavefront OBJ with "v" and "f" (triangles, 1-based) records only.
void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh load_obj(const std::filesystem::path& path);

}  // namespace kf
