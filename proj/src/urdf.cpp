#include "kinemaforge/urdf.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

#include "kinemaforge/error.hpp"

namespace kf {

int UrdfModel::link_index(const std::string& link_name) const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (links[i].name == link_name) return static_cast<int>(i);
  }
  return -1;
}

int UrdfModel::root_link() const {
  std::vector<bool> is_child(links.size(), false);
  for (const auto& j : joints) {
    int c = link_index(j.child);
    int p = link_index(j.parent);
    if (c < 0 || p < 0) {
      throw Error(ErrorCode::TreeJointMismatch,
                  "joint " + j.name + " references unknown links");
    }
    if (is_child[static_cast<std::size_t>(c)]) {
      throw Error(ErrorCode::TreeJointMismatch,
                  "link " + j.child + " has two parent joints");
    }
    is_child[static_cast<std::size_t>(c)] = true;
  }
  int root = -1;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (!is_child[i]) {
      if (root >= 0) {
        throw Error(ErrorCode::TreeJointMismatch, "multiple root links");
      }
      root = static_cast<int>(i);
    }
  }
  if (root < 0) {
    throw Error(ErrorCode::TreeJointMismatch, "no root link (joint cycle)");
  }
  return root;
}

UrdfModel build_urdf(const KinematicTree& tree,
                     const std::vector<RevoluteJoint>& joints,
                     const std::vector<Pose>& rest_link_poses,
                     const std::vector<std::string>& mesh_files,
                     const std::string& name) {
  const std::size_t n = tree.links.size();
  if (rest_link_poses.size() != n || mesh_files.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "build_urdf: per-link array sizes");
  }
  // Joints must cover the tree edges exactly.
  std::vector<const RevoluteJoint*> joint_of_child(n, nullptr);
  for (const auto& j : joints) {
    if (j.child < 0 || static_cast<std::size_t>(j.child) >= n ||
        joint_of_child[static_cast<std::size_t>(j.child)] != nullptr) {
      throw Error(ErrorCode::TreeJointMismatch, "duplicate or out-of-range joint");
    }
    joint_of_child[static_cast<std::size_t>(j.child)] = &j;
  }
  auto edges = tree.edges();
  if (edges.size() != joints.size()) {
    throw Error(ErrorCode::TreeJointMismatch,
                "joint count does not match tree edges");
  }
  for (const auto& [p, c] : edges) {
    const RevoluteJoint* j = joint_of_child[static_cast<std::size_t>(c)];
    if (j == nullptr || j->parent != p) {
      throw Error(ErrorCode::TreeJointMismatch,
                  "tree edge " + std::to_string(p) + "->" + std::to_string(c) +
                      " has no matching joint");
    }
  }

  // Pre-order traversal (children ascending).
  std::vector<int> order;
  order.reserve(n);
  std::deque<int> stack{tree.root};
  while (!stack.empty()) {
    int cur = stack.front();
    stack.pop_front();
    order.push_back(cur);
    auto kids = tree.children_of(cur);
    for (std::size_t i = kids.size(); i-- > 0;) {
      stack.push_front(kids[i]);
    }
  }

  // URDF frame of every link: root frame = world; a child frame sits at its
  // joint center (world rest coordinates) with the identity orientation.
  std::vector<Eigen::Vector3d> frame_pos(n, Eigen::Vector3d::Zero());
  for (int id : order) {
    if (id == tree.root) continue;
    const RevoluteJoint* j = joint_of_child[static_cast<std::size_t>(id)];
    Transform3D hp =
        pose_to_transform(rest_link_poses[static_cast<std::size_t>(j->parent)]);
    frame_pos[static_cast<std::size_t>(id)] = hp.apply(j->origin);
  }

  UrdfModel model;
  model.name = name;
  for (int id : order) {
    const Pose& rest = rest_link_poses[static_cast<std::size_t>(id)];
    UrdfLink link;
    link.name = "link_" + std::to_string(id);
    link.has_geometry = !mesh_files[static_cast<std::size_t>(id)].empty();
    link.mesh_filename = mesh_files[static_cast<std::size_t>(id)];
    // Mesh vertices live in the link track frame; place them relative to the
    // URDF frame (identity orientation at rest).
    link.visual_origin.xyz = rest.position - frame_pos[static_cast<std::size_t>(id)];
    link.visual_origin.rpy = matrix_to_rpy(rest.orientation.to_matrix());
    model.links.push_back(std::move(link));
  }
  for (int id : order) {
    if (id == tree.root) continue;
    const RevoluteJoint* j = joint_of_child[static_cast<std::size_t>(id)];
    Transform3D hp =
        pose_to_transform(rest_link_poses[static_cast<std::size_t>(j->parent)]);
    UrdfJoint out;
    out.name = "joint_" + std::to_string(j->parent) + "_" + std::to_string(id);
    out.parent = "link_" + std::to_string(j->parent);
    out.child = "link_" + std::to_string(id);
    out.origin.xyz = frame_pos[static_cast<std::size_t>(id)] -
                     frame_pos[static_cast<std::size_t>(j->parent)];
    out.origin.rpy = Eigen::Vector3d::Zero();
    out.axis = (hp.R * j->axis).normalized();
    out.lower = j->lower;
    out.upper = j->upper;
    model.joints.push_back(std::move(out));
  }
  return model;
}

// Serialization ------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt3(const Eigen::Vector3d& v) {
  return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

void emit_origin(std::ostringstream& out, const std::string& indent,
                 const UrdfOrigin& origin) {
  out << indent << "<origin xyz=\"" << fmt3(origin.xyz) << "\" rpy=\""
      << fmt3(origin.rpy) << "\"/>\n";
}

}  // namespace

std::string emit_urdf(const UrdfModel& model) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\"?>\n";
  out << "<robot name=\"" << model.name << "\">\n";
  for (const auto& link : model.links) {
    out << "  <link name=\"" << link.name << "\">\n";
    if (link.has_geometry) {
      for (const char* block : {"visual", "collision"}) {
        out << "    <" << block << ">\n";
        emit_origin(out, "      ", link.visual_origin);
        out << "      <geometry>\n";
        out << "        <mesh filename=\"" << link.mesh_filename << "\"/>\n";
        out << "      </geometry>\n";
        out << "    </" << block << ">\n";
      }
    }
    if (link.has_inertial) {
      out << "    <!-- inertial values are placeholders, not estimated from "
             "the scans -->\n";
      out << "    <inertial>\n";
      out << "      <origin xyz=\"0 0 0\" rpy=\"0 0 0\"/>\n";
      out << "      <mass value=\"" << fmt(link.mass) << "\"/>\n";
      out << "      <inertia ixx=\"" << fmt(link.ixx) << "\" ixy=\"0\" ixz=\"0\""
          << " iyy=\"" << fmt(link.iyy) << "\" iyz=\"0\" izz=\"" << fmt(link.izz)
          << "\"/>\n";
      out << "    </inertial>\n";
    }
    out << "  </link>\n";
  }
  for (const auto& joint : model.joints) {
    out << "  <joint name=\"" << joint.name << "\" type=\"" << joint.type
        << "\">\n";
    emit_origin(out, "    ", joint.origin);
    out << "    <parent link=\"" << joint.parent << "\"/>\n";
    out << "    <child link=\"" << joint.child << "\"/>\n";
    out << "    <axis xyz=\"" << fmt3(joint.axis) << "\"/>\n";
    out << "    <limit lower=\"" << fmt(joint.lower) << "\" upper=\""
        << fmt(joint.upper) << "\" effort=\"" << fmt(joint.effort)
        << "\" velocity=\"" << fmt(joint.velocity) << "\"/>\n";
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

// Minimal XML reader for the URDF subset above: elements, double-quoted
// attributes, comments, and the XML declaration.  No entities, no CDATA.
namespace {

struct XmlNode {
  std::string tag;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<XmlNode> children;

  const XmlNode* child(const std::string& t) const {
    for (const auto& c : children) {
      if (c.tag == t) return &c;
    }
    return nullptr;
  }
  std::string attr(const std::string& name, const std::string& fallback = "") const {
    for (const auto& [k, v] : attrs) {
      if (k == name) return v;
    }
    return fallback;
  }
};

struct XmlParser {
  const std::string& s;
  std::size_t pos = 0;

  explicit XmlParser(const std::string& text) : s(text) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError,
                "urdf xml at offset " + std::to_string(pos) + ": " + what);
  }

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    }
  }

  // Skips whitespace, comments, and processing instructions.
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (s.compare(pos, 4, "<!--") == 0) {
        std::size_t end = s.find("-->", pos + 4);
        if (end == std::string::npos) fail("unterminated comment");
        pos = end + 3;
      } else if (s.compare(pos, 2, "<?") == 0) {
        std::size_t end = s.find("?>", pos + 2);
        if (end == std::string::npos) fail("unterminated declaration");
        pos = end + 2;
      } else {
        return;
      }
    }
  }

  std::string read_name() {
    std::size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_' ||
            s[pos] == '-' || s[pos] == ':')) {
      ++pos;
    }
    if (pos == start) fail("expected name");
    return s.substr(start, pos - start);
  }

  XmlNode parse_element() {
    if (pos >= s.size() || s[pos] != '<') fail("expected element");
    ++pos;
    XmlNode node;
    node.tag = read_name();
    for (;;) {
      skip_ws();
      if (pos >= s.size()) fail("unterminated tag");
      if (s[pos] == '/') {
        if (s.compare(pos, 2, "/>") != 0) fail("malformed self-close");
        pos += 2;
        return node;
      }
      if (s[pos] == '>') {
        ++pos;
        break;
      }
      std::string key = read_name();
      skip_ws();
      if (pos >= s.size() || s[pos] != '=') fail("expected '='");
      ++pos;
      skip_ws();
      if (pos >= s.size() || s[pos] != '"') fail("expected '\"'");
      ++pos;
      std::size_t end = s.find('"', pos);
      if (end == std::string::npos) fail("unterminated attribute");
      node.attrs.emplace_back(key, s.substr(pos, end - pos));
      pos = end + 1;
    }
    // Children until the closing tag.
    for (;;) {
      skip_misc();
      if (pos >= s.size()) fail("unterminated element " + node.tag);
      if (s.compare(pos, 2, "</") == 0) {
        pos += 2;
        std::string closing = read_name();
        if (closing != node.tag) {
          fail("mismatched closing tag " + closing + " for " + node.tag);
        }
        skip_ws();
        if (pos >= s.size() || s[pos] != '>') fail("malformed closing tag");
        ++pos;
        return node;
      }
      if (s[pos] == '<') {
        node.children.push_back(parse_element());
      } else {
        fail("unexpected text content");
      }
    }
  }
};

Eigen::Vector3d parse_vec3(const std::string& text, const char* what) {
  Eigen::Vector3d v;
  std::istringstream in(text);
  if (!(in >> v.x() >> v.y() >> v.z())) {
    throw Error(ErrorCode::ParseError, std::string("bad ") + what + ": " + text);
  }
  return v;
}

double parse_num(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, std::string("bad ") + what + ": " + text);
  }
}

UrdfOrigin parse_origin(const XmlNode* node) {
  UrdfOrigin o;
  if (node == nullptr) return o;
  std::string xyz = node->attr("xyz");
  std::string rpy = node->attr("rpy");
  if (!xyz.empty()) o.xyz = parse_vec3(xyz, "origin xyz");
  if (!rpy.empty()) o.rpy = parse_vec3(rpy, "origin rpy");
  return o;
}

}  // namespace

UrdfModel parse_urdf(const std::string& xml) {
  XmlParser parser(xml);
  parser.skip_misc();
  XmlNode root = parser.parse_element();
  parser.skip_misc();
  if (root.tag != "robot") {
    throw Error(ErrorCode::ParseError, "top-level element must be <robot>");
  }

  UrdfModel model;
  model.name = root.attr("name");
  for (const auto& node : root.children) {
    if (node.tag == "link") {
      UrdfLink link;
      link.name = node.attr("name");
      if (link.name.empty()) {
        throw Error(ErrorCode::ParseError, "link without a name");
      }
      link.has_inertial = false;
      if (const XmlNode* visual = node.child("visual")) {
        link.visual_origin = parse_origin(visual->child("origin"));
        const XmlNode* geom = visual->child("geometry");
        const XmlNode* mesh = geom ? geom->child("mesh") : nullptr;
        if (mesh == nullptr) {
          throw Error(ErrorCode::ParseError,
                      "link " + link.name + ": only mesh geometry is supported");
        }
        link.mesh_filename = mesh->attr("filename");
        link.has_geometry = true;
      }
      if (const XmlNode* inertial = node.child("inertial")) {
        link.has_inertial = true;
        if (const XmlNode* mass = inertial->child("mass")) {
          link.mass = parse_num(mass->attr("value", "0"), "mass");
        }
        if (const XmlNode* inertia = inertial->child("inertia")) {
          link.ixx = parse_num(inertia->attr("ixx", "0"), "ixx");
          link.iyy = parse_num(inertia->attr("iyy", "0"), "iyy");
          link.izz = parse_num(inertia->attr("izz", "0"), "izz");
        }
      }
      model.links.push_back(std::move(link));
    } else if (node.tag == "joint") {
      UrdfJoint joint;
      joint.name = node.attr("name");
      joint.type = node.attr("type");
      if (joint.type != "revolute" && joint.type != "fixed") {
        throw Error(ErrorCode::ParseError,
                    "joint " + joint.name + ": unsupported type " + joint.type);
      }
      joint.origin = parse_origin(node.child("origin"));
      const XmlNode* parent = node.child("parent");
      const XmlNode* child = node.child("child");
      if (parent == nullptr || child == nullptr) {
        throw Error(ErrorCode::ParseError,
                    "joint " + joint.name + ": missing parent/child");
      }
      joint.parent = parent->attr("link");
      joint.child = child->attr("link");
      if (const XmlNode* axis = node.child("axis")) {
        joint.axis = parse_vec3(axis->attr("xyz", "1 0 0"), "axis");
      }
      if (const XmlNode* limit = node.child("limit")) {
        joint.lower = parse_num(limit->attr("lower", "0"), "lower");
        joint.upper = parse_num(limit->attr("upper", "0"), "upper");
        joint.effort = parse_num(limit->attr("effort", "0"), "effort");
        joint.velocity = parse_num(limit->attr("velocity", "0"), "velocity");
      }
      model.joints.push_back(std::move(joint));
    }
    // Other elements (material, gazebo, ...) are ignored.
  }
  if (model.links.empty()) {
    throw Error(ErrorCode::ParseError, "robot has no links");
  }
  return model;
}

void save_urdf(const std::filesystem::path& path, const UrdfModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << emit_urdf(model);
}

UrdfModel load_urdf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_urdf(ss.str());
}

std::map<std::string, Transform3D> fk_frames(
    const UrdfModel& model, const std::map<std::string, double>& angles) {
  for (const auto& [name, angle] : angles) {
    (void)angle;
    bool known = false;
    for (const auto& j : model.joints) {
      if (j.name == name) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw Error(ErrorCode::UnknownJointName, name);
    }
  }

  int root = model.root_link();
  std::map<std::string, Transform3D> frames;
  frames[model.links[static_cast<std::size_t>(root)].name] = Transform3D{};

  // Joints whose parent frame is resolved can be applied; iterate until all
  // links are placed (the tree structure guarantees progress).
  std::vector<bool> applied(model.joints.size(), false);
  std::size_t placed = 1;
  while (placed < model.links.size()) {
    bool progress = false;
    for (std::size_t i = 0; i < model.joints.size(); ++i) {
      if (applied[i]) continue;
      const UrdfJoint& j = model.joints[i];
      auto it = frames.find(j.parent);
      if (it == frames.end()) continue;
      double theta = 0.0;
      if (auto a = angles.find(j.name); a != angles.end()) theta = a->second;
      if (j.type == "revolute" && (theta < j.lower || theta > j.upper)) {
        double clamped = std::clamp(theta, j.lower, j.upper);
        std::fprintf(stderr, "fk: clamping %s from %.9g to %.9g\n",
                     j.name.c_str(), theta, clamped);
        theta = clamped;
      }
      Transform3D t;
      t.R = rpy_to_matrix(j.origin.rpy);
      t.t = j.origin.xyz;
      Transform3D child = it->second * t;
      // Zero angle composes with an exact identity; skipping the multiply
      // keeps the rest configuration bit-identical to the accumulated
      // origins.
      if (j.type == "revolute" && theta != 0.0) {
        Transform3D motion;
        motion.R = rotation_from_axis_angle(j.axis, theta);
        child = child * motion;
      }
      frames[j.child] = child;
      applied[i] = true;
      ++placed;
      progress = true;
    }
    if (!progress) {
      throw Error(ErrorCode::TreeJointMismatch,
                  "joints do not connect all links to the root");
    }
  }
  return frames;
}

PointCloud sample_surface(const UrdfModel& model,
                          const std::vector<TriangleMesh>& meshes,
                          const std::map<std::string, double>& angles,
                          std::size_t n, Rng& rng) {
  if (meshes.size() != model.links.size()) {
    throw Error(ErrorCode::ShapeMismatch, "mesh count != link count");
  }
  std::vector<double> areas(meshes.size(), 0.0);
  double total_area = 0.0;
  std::size_t last_solid = 0;
  for (std::size_t l = 0; l < meshes.size(); ++l) {
    double area = 0.0;
    for (const auto& t : meshes[l].triangles) {
      const Eigen::Vector3d& a = meshes[l].vertices[static_cast<std::size_t>(t[0])];
      const Eigen::Vector3d& b = meshes[l].vertices[static_cast<std::size_t>(t[1])];
      const Eigen::Vector3d& c = meshes[l].vertices[static_cast<std::size_t>(t[2])];
      area += 0.5 * (b - a).cross(c - a).norm();
    }
    areas[l] = area;
    total_area += area;
    if (area > 0.0) last_solid = l;
  }
  if (total_area <= 0.0) {
    throw Error(ErrorCode::MissingMesh, "no link mesh has any surface");
  }
  std::map<std::string, Transform3D> frames = fk_frames(model, angles);
  PointCloud out;
  out.pts.reserve(n);
  std::size_t remaining = n;
  double remaining_area = total_area;
  for (std::size_t l = 0; l < meshes.size(); ++l) {
    if (areas[l] <= 0.0) continue;
    std::size_t quota =
        l == last_solid
            ? remaining
            : static_cast<std::size_t>(std::llround(
                  static_cast<double>(remaining) * areas[l] / remaining_area));
    quota = std::min(quota, remaining);
    remaining -= quota;
    remaining_area -= areas[l];
    if (quota == 0) continue;
    PointCloud local = sample_mesh_surface(meshes[l], quota, rng);
    const UrdfLink& link = model.links[l];
    Transform3D visual;
    visual.R = rpy_to_matrix(link.visual_origin.rpy);
    visual.t = link.visual_origin.xyz;
    Transform3D world = frames.at(link.name) * visual;
    for (const auto& q : local.pts) out.pts.push_back(world.apply(q));
  }
  return out;
}

PointCloud sample_surface(const UrdfModel& model,
                          const std::filesystem::path& mesh_root,
                          const std::map<std::string, double>& angles,
                          std::size_t n, std::uint64_t seed) {
  std::vector<TriangleMesh> meshes(model.links.size());
  for (std::size_t l = 0; l < model.links.size(); ++l) {
    const UrdfLink& link = model.links[l];
    if (!link.has_geometry) continue;
    std::filesystem::path path = mesh_root / link.mesh_filename;
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::MissingMesh, path.string());
    }
    meshes[l] = load_obj(path);
  }
  Rng rng(derive_seed(seed, "urdf-surface"));
  return sample_surface(model, meshes, angles, n, rng);
}

}  // namespace kf
