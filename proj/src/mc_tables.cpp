#include <array>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/meshing.hpp"

// Marching-cubes case tables, generated rather than transcribed.  For each of
// the 256 corner-sign configurations the surface crossings on the 12 cell
// edges are linked into closed loops and fan-triangulated.  Two properties
// make the result robust:
//
//  * On a face where all four edges cross (the ambiguous case) the crossings
//    are paired so that each "inside" corner is cut off individually.  The
//    pairing depends only on the face's corner signs, which both cells
//    sharing the face see identically, so neighbouring cells always agree on
//    the face segments and the global mesh is closed.
//
//  * Each face segment is directed so that, viewed from outside the cell,
//    the inside region lies to its left.  Segments then chain head-to-tail
//    into directed loops, and the two cells sharing a face traverse the
//    shared segment in opposite directions, which makes the global
//    orientation consistent.

namespace kf {

namespace {

// Corner numbering: bit0 = x, bit1 = y, bit2 = z.
inline Eigen::Vector3d corner_pos(int c) {
  return {static_cast<double>(c & 1), static_cast<double>((c >> 1) & 1),
          static_cast<double>((c >> 2) & 1)};
}

struct EdgeDef {
  int base;  // corner with a 0 bit in `axis`
  int axis;
};

constexpr std::array<EdgeDef, 12> kEdges = {{
    {0, 0}, {2, 0}, {4, 0}, {6, 0},  // x-edges
    {0, 1}, {1, 1}, {4, 1}, {5, 1},  // y-edges
    {0, 2}, {1, 2}, {2, 2}, {3, 2},  // z-edges
}};

std::array<std::vector<std::int8_t>, 256> build_tables() {
  std::array<std::vector<std::int8_t>, 256> table;

  for (int config = 0; config < 256; ++config) {
    bool inside[8];
    for (int c = 0; c < 8; ++c) inside[c] = (config >> c) & 1;

    bool crossed[12];
    Eigen::Vector3d mid[12];
    for (int e = 0; e < 12; ++e) {
      int a = kEdges[static_cast<std::size_t>(e)].base;
      int b = a | (1 << kEdges[static_cast<std::size_t>(e)].axis);
      crossed[e] = inside[a] != inside[b];
      mid[e] = 0.5 * (corner_pos(a) + corner_pos(b));
    }

    // next[e] = edge the directed segment starting at crossing e leads to.
    std::array<int, 12> next;
    next.fill(-1);

    auto add_segment = [&](int from, int to, const Eigen::Vector3d& n,
                           const Eigen::Vector3d& toward_inside) {
      Eigen::Vector3d d = mid[to] - mid[from];
      if (n.cross(d).dot(toward_inside) < 0.0) std::swap(from, to);
      if (next[static_cast<std::size_t>(from)] != -1) std::abort();  // rule violated
      next[static_cast<std::size_t>(from)] = to;
    };

    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        Eigen::Vector3d n = Eigen::Vector3d::Zero();
        n[axis] = side ? 1.0 : -1.0;

        int face_edges[4];
        int ne = 0;
        for (int e = 0; e < 12; ++e) {
          if (kEdges[static_cast<std::size_t>(e)].axis == axis) continue;
          int a = kEdges[static_cast<std::size_t>(e)].base;
          if (((a >> axis) & 1) != side) continue;
          face_edges[ne++] = e;
        }
        int cross_on_face[4];
        int nc = 0;
        for (int i = 0; i < 4; ++i) {
          if (crossed[face_edges[i]]) cross_on_face[nc++] = face_edges[i];
        }
        if (nc == 0) continue;

        int face_corners[4];
        int ncorn = 0;
        for (int c = 0; c < 8; ++c) {
          if (((c >> axis) & 1) == side) face_corners[ncorn++] = c;
        }

        if (nc == 2) {
          Eigen::Vector3d inside_centroid = Eigen::Vector3d::Zero();
          int n_in = 0;
          for (int i = 0; i < 4; ++i) {
            if (inside[face_corners[i]]) {
              inside_centroid += corner_pos(face_corners[i]);
              ++n_in;
            }
          }
          inside_centroid /= static_cast<double>(n_in);
          Eigen::Vector3d seg_mid = 0.5 * (mid[cross_on_face[0]] + mid[cross_on_face[1]]);
          add_segment(cross_on_face[0], cross_on_face[1], n,
                      inside_centroid - seg_mid);
        } else {
          // Ambiguous face: all four edges crossed, inside corners diagonal.
          // Cut each inside corner off with the segment joining the crossings
          // on its two incident face edges.
          for (int i = 0; i < 4; ++i) {
            int c = face_corners[i];
            if (!inside[c]) continue;
            int incident[2];
            int k = 0;
            for (int j = 0; j < 4; ++j) {
              int e = face_edges[j];
              int a = kEdges[static_cast<std::size_t>(e)].base;
              int b = a | (1 << kEdges[static_cast<std::size_t>(e)].axis);
              if (a == c || b == c) incident[k++] = e;
            }
            Eigen::Vector3d seg_mid = 0.5 * (mid[incident[0]] + mid[incident[1]]);
            add_segment(incident[0], incident[1], n, corner_pos(c) - seg_mid);
          }
        }
      }
    }

    // Every crossed edge must now have exactly one outgoing segment (and, by
    // counting, one incoming).  Chain them into loops and fan-triangulate.
    for (int e = 0; e < 12; ++e) {
      if (crossed[e] != (next[static_cast<std::size_t>(e)] != -1)) std::abort();
    }
    bool used[12] = {};
    auto& tris = table[static_cast<std::size_t>(config)];
    for (int start = 0; start < 12; ++start) {
      if (!crossed[start] || used[start]) continue;
      std::vector<int> loop;
      int cur = start;
      do {
        loop.push_back(cur);
        used[cur] = true;
        cur = next[static_cast<std::size_t>(cur)];
      } while (cur != start);
      if (loop.size() < 3) std::abort();
      for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
        tris.push_back(static_cast<std::int8_t>(loop[0]));
        tris.push_back(static_cast<std::int8_t>(loop[i]));
        tris.push_back(static_cast<std::int8_t>(loop[i + 1]));
      }
    }
  }
  return table;
}

}  // namespace

const std::array<std::vector<std::int8_t>, 256>& mc_case_table() {
  static const std::array<std::vector<std::int8_t>, 256> table = build_tables();
  return table;
}

int mc_edge_base(int edge) { return kEdges[static_cast<std::size_t>(edge)].base; }
int mc_edge_axis(int edge) { return kEdges[static_cast<std::size_t>(edge)].axis; }

}  // namespace kf
