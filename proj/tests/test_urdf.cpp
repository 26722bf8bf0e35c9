#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "kinemaforge/error.hpp"
#include "kinemaforge/urdf.hpp"
#include "test_support.hpp"

using namespace kf;

namespace {

// Two bare links joined by a z hinge through (0.1, 0, 0); rest poses are the
// identity, so every derived origin is known by hand.
UrdfModel two_link_model(const std::vector<std::string>& mesh_files = {"", ""}) {
  KinematicTree tree = infer_topology(2, {{0, 1, 1.0}}, 0, {0, 1});
  RevoluteJoint j;
  j.parent = 0;
  j.child = 1;
  j.axis = {0.0, 0.0, 1.0};
  j.origin = {0.1, 0.0, 0.0};
  j.lower = -2.0;
  j.upper = 2.0;
  std::vector<Pose> rest(2);
  return build_urdf(tree, {j}, rest, mesh_files, "pair");
}

TriangleMesh unit_square(double z) {
  TriangleMesh mesh;
  mesh.vertices = {{0, 0, z}, {1, 0, z}, {1, 1, z}, {0, 1, z}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

bool same_transform(const Transform3D& a, const Transform3D& b) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (a.R(r, c) != b.R(r, c)) return false;
    }
  }
  return kftest::same_xyz(a.t, b.t);
}

}  // namespace

TEST_SUITE("urdf") {

TEST_CASE("two link assembly hand oracle") {
  UrdfModel m = two_link_model({"meshes/link_0.obj", "meshes/link_1.obj"});
  CHECK(m.name == "pair");
  REQUIRE(m.links.size() == 2);
  REQUIRE(m.joints.size() == 1);

  CHECK(m.links[0].name == "link_0");
  CHECK(m.links[1].name == "link_1");
  CHECK(m.links[0].mesh_filename == "meshes/link_0.obj");
  // Root frame is the world frame; its mesh needs no offset.
  CHECK((m.links[0].visual_origin.xyz).norm() == 0.0);
  CHECK((m.links[0].visual_origin.rpy).norm() == 0.0);
  // The child frame sits at the joint center, so its mesh (stored in rest
  // world coordinates) moves back by the same amount.
  CHECK((m.links[1].visual_origin.xyz - Eigen::Vector3d(-0.1, 0, 0)).norm() <
        1e-15);

  const UrdfJoint& j = m.joints[0];
  CHECK(j.name == "joint_0_1");
  CHECK(j.type == "revolute");
  CHECK(j.parent == "link_0");
  CHECK(j.child == "link_1");
  CHECK((j.origin.xyz - Eigen::Vector3d(0.1, 0, 0)).norm() < 1e-15);
  CHECK(j.origin.rpy.norm() == 0.0);
  CHECK((j.axis - Eigen::Vector3d(0, 0, 1)).norm() < 1e-15);
  CHECK(j.lower == -2.0);
  CHECK(j.upper == 2.0);

  CHECK(m.link_index("link_1") == 1);
  CHECK(m.link_index("nope") == -1);
  CHECK(m.root_link() == 0);
}

TEST_CASE("assembly rejects joints that do not match the tree") {
  KinematicTree tree = infer_topology(2, {{0, 1, 1.0}}, 0, {0, 1});
  std::vector<Pose> rest(2);
  RevoluteJoint j;
  j.parent = 0;
  j.child = 1;
  CHECK_THROWS_AS(build_urdf(tree, {}, rest, {"", ""}, "m"), Error);
  RevoluteJoint wrong = j;
  wrong.parent = 1;
  wrong.child = 0;
  CHECK_THROWS_AS(build_urdf(tree, {wrong}, rest, {"", ""}, "m"), Error);
  CHECK_THROWS_AS(build_urdf(tree, {j, j}, rest, {"", ""}, "m"), Error);
  CHECK_THROWS_AS(build_urdf(tree, {j}, rest, {""}, "m"), Error);
}

TEST_CASE("forward kinematics swings the child about the joint") {
  UrdfModel m = two_link_model();
  std::map<std::string, Transform3D> frames =
      fk_frames(m, {{"joint_0_1", M_PI / 2.0}});
  const Transform3D& child = frames.at("link_1");

  // A rest-world mesh point (0.2, 0, 0) passes through the visual offset and
  // the link frame; rotating 90 degrees about z through (0.1, 0, 0) lands it
  // at (0.1, 0.1, 0).
  Eigen::Vector3d local =
      m.links[1].visual_origin.xyz + Eigen::Vector3d(0.2, 0.0, 0.0);
  Eigen::Vector3d world = child.apply(local);
  CHECK((world - Eigen::Vector3d(0.1, 0.1, 0.0)).norm() < 1e-12);

  CHECK_THROWS_AS(fk_frames(m, {{"no_such_joint", 0.3}}), Error);
}

TEST_CASE("forward kinematics clamps out-of-range angles") {
  UrdfModel m = two_link_model();
  std::map<std::string, Transform3D> at_limit =
      fk_frames(m, {{"joint_0_1", 2.0}});
  std::map<std::string, Transform3D> beyond =
      fk_frames(m, {{"joint_0_1", 5.0}});
  CHECK(same_transform(at_limit.at("link_1"), beyond.at("link_1")));
}

TEST_CASE("zero angles reproduce the accumulated rest frames exactly") {
  // A three link chain with rotated, translated rest poses.
  KinematicTree tree =
      infer_topology(3, {{0, 1, 1.0}, {1, 2, 1.0}}, 0, {0, 1, 2});
  std::vector<Pose> rest(3);
  rest[1].position = {0.3, 0.1, -0.2};
  rest[1].orientation =
      Quat::from_axis_angle(Eigen::Vector3d(0.2, 0.1, 1.0).normalized(), 0.4);
  rest[2].position = {0.55, 0.3, 0.15};
  rest[2].orientation =
      Quat::from_axis_angle(Eigen::Vector3d(1.0, -0.3, 0.2).normalized(), -0.7);

  RevoluteJoint j01;
  j01.parent = 0;
  j01.child = 1;
  j01.axis = Eigen::Vector3d(0.3, -0.2, 1.0).normalized();
  j01.origin = {0.15, 0.05, -0.1};
  j01.lower = -1.0;
  j01.upper = 1.0;
  RevoluteJoint j12;
  j12.parent = 1;
  j12.child = 2;
  j12.axis = Eigen::Vector3d(0.0, 1.0, 0.1).normalized();
  j12.origin = {0.2, 0.1, 0.05};
  j12.lower = -0.8;
  j12.upper = 0.9;

  UrdfModel m = build_urdf(tree, {j01, j12}, rest, {"", "", ""}, "chain");
  std::map<std::string, Transform3D> frames = fk_frames(m, {});

  // Independent accumulation in the same parent-before-child order the file
  // stores: each link frame is its parent's frame plus the joint offset.
  std::map<std::string, Transform3D> expect;
  expect[m.links[m.root_link()].name] = Transform3D{};
  for (const UrdfJoint& j : m.joints) {
    Transform3D t = expect.at(j.parent);
    t.t += j.origin.xyz;
    expect[j.child] = t;
  }
  REQUIRE(frames.size() == expect.size());
  for (const auto& [name, tf] : expect) {
    CHECK(same_transform(frames.at(name), tf));
  }
}

TEST_CASE("serialization is byte stable") {
  UrdfModel bare = two_link_model();
  std::string first = emit_urdf(bare);
  CHECK(emit_urdf(parse_urdf(first)) == first);

  // Awkward numbers survive the print-parse-print cycle too.
  UrdfModel m = two_link_model({"meshes/link_0.obj", "meshes/link_1.obj"});
  m.joints[0].axis = Eigen::Vector3d(1.0, 1.0, 1.0).normalized();
  m.joints[0].origin.xyz = {M_PI, -1.0 / 3.0, 1e-7};
  m.joints[0].lower = -std::sqrt(2.0);
  m.links[1].visual_origin.rpy = {0.1234567891234, 0.0, -2.5};
  std::string second = emit_urdf(m);
  CHECK(emit_urdf(parse_urdf(second)) == second);
}

TEST_CASE("file round trip") {
  kftest::TempDir tmp("urdf");
  UrdfModel m = two_link_model({"meshes/link_0.obj", "meshes/link_1.obj"});
  save_urdf(tmp.path / "model.urdf", m);
  UrdfModel back = load_urdf(tmp.path / "model.urdf");
  CHECK(emit_urdf(back) == emit_urdf(m));
  CHECK_THROWS_AS(load_urdf(tmp.path / "absent.urdf"), Error);
}

TEST_CASE("parser tolerates foreign elements") {
  std::string xml = R"(<?xml version="1.0"?>
<!-- exported scene -->
<robot name="toy">
  <material name="gray"><color rgba="0.5 0.5 0.5 1"/></material>
  <link name="base">
    <inertial>
      <mass value="2.5"/>
      <inertia ixx="0.01" iyy="0.02" izz="0.03" ixy="0" ixz="0" iyz="0"/>
    </inertial>
    <visual>
      <origin xyz="0.5 0 0.25" rpy="0 0 1.5"/>
      <geometry><mesh filename="meshes/base.obj" scale="1 1 1"/></geometry>
      <material name="gray"/>
    </visual>
  </link>
  <link name="arm"/>
  <joint name="swing" type="revolute">
    <origin xyz="0 0 0.5"/>
    <parent link="base"/>
    <child link="arm"/>
    <axis xyz="0 1 0"/>
    <limit lower="-1.5" upper="1.5" effort="20" velocity="3"/>
    <dynamics damping="0.1"/>
  </joint>
  <gazebo reference="base"/>
</robot>
)";
  UrdfModel m = parse_urdf(xml);
  CHECK(m.name == "toy");
  REQUIRE(m.links.size() == 2);
  CHECK(m.links[0].name == "base");
  CHECK(m.links[0].has_geometry);
  CHECK(m.links[0].mesh_filename == "meshes/base.obj");
  CHECK((m.links[0].visual_origin.xyz - Eigen::Vector3d(0.5, 0, 0.25)).norm() ==
        0.0);
  CHECK(m.links[0].mass == 2.5);
  CHECK(!m.links[1].has_geometry);
  REQUIRE(m.joints.size() == 1);
  CHECK(m.joints[0].name == "swing");
  CHECK(m.joints[0].parent == "base");
  CHECK(m.joints[0].child == "arm");
  CHECK(m.joints[0].lower == -1.5);
  CHECK(m.joints[0].upper == 1.5);
  CHECK(m.root_link() == 0);

  // A parsed model re-emits stably even though the input formatting differs.
  std::string canon = emit_urdf(m);
  CHECK(emit_urdf(parse_urdf(canon)) == canon);
}

TEST_CASE("parser rejects what the writer never produces") {
  CHECK_THROWS_AS(parse_urdf("<model name=\"x\"/>"), Error);
  CHECK_THROWS_AS(parse_urdf("<robot name=\"x\"></robot>"), Error);
  CHECK_THROWS_AS(parse_urdf("<robot name=\"x\"><link name=\"a\">"), Error);
  CHECK_THROWS_AS(
      parse_urdf("<robot name=\"x\"><link name=\"a\"/>"
                 "<joint name=\"j\" type=\"prismatic\">"
                 "<parent link=\"a\"/><child link=\"a\"/></joint></robot>"),
      Error);
  CHECK_THROWS_AS(
      parse_urdf("<robot name=\"x\"><link name=\"a\"/>"
                 "<joint name=\"j\" type=\"revolute\">"
                 "<child link=\"a\"/></joint></robot>"),
      Error);
  CHECK_THROWS_AS(
      parse_urdf("<robot name=\"x\"><link name=\"a\">"
                 "<visual><geometry/></visual></link></robot>"),
      Error);
  CHECK_THROWS_AS(
      parse_urdf("<robot name=\"x\"><link name=\"a\"/>"
                 "<joint name=\"j\" type=\"revolute\">"
                 "<parent link=\"a\"/><child link=\"a\"/>"
                 "<axis xyz=\"0 z 1\"/></joint></robot>"),
      Error);
}

TEST_CASE("root detection flags broken structures") {
  UrdfModel two_roots;
  two_roots.links.resize(2);
  two_roots.links[0].name = "a";
  two_roots.links[1].name = "b";
  CHECK_THROWS_AS(two_roots.root_link(), Error);

  UrdfModel cycle = two_roots;
  cycle.joints.resize(2);
  cycle.joints[0].parent = "a";
  cycle.joints[0].child = "b";
  cycle.joints[1].parent = "b";
  cycle.joints[1].child = "a";
  CHECK_THROWS_AS(cycle.root_link(), Error);

  UrdfModel dangling = two_roots;
  dangling.joints.resize(1);
  dangling.joints[0].parent = "a";
  dangling.joints[0].child = "ghost";
  CHECK_THROWS_AS(dangling.root_link(), Error);
}

TEST_CASE("surface sampling follows the posed links") {
  UrdfModel m = two_link_model({"meshes/link_0.obj", "meshes/link_1.obj"});
  std::vector<TriangleMesh> meshes = {unit_square(0.0), TriangleMesh{}};

  Rng rng(31);
  PointCloud pts = sample_mesh_surface(meshes[0], 1, rng);  // warm sanity
  (void)pts;

  Rng rng_a(99), rng_b(99);
  PointCloud a = sample_surface(m, meshes, {}, 500, rng_a);
  PointCloud b = sample_surface(m, meshes, {}, 500, rng_b);
  REQUIRE(a.size() == 500);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(kftest::same_xyz(a.pts[i], b.pts[i]));
    CHECK(a.pts[i].z() == 0.0);
    CHECK(a.pts[i].x() >= -1e-12);
    CHECK(a.pts[i].x() <= 1.0 + 1e-12);
    CHECK(a.pts[i].y() >= -1e-12);
    CHECK(a.pts[i].y() <= 1.0 + 1e-12);
  }

  std::vector<TriangleMesh> empty = {TriangleMesh{}, TriangleMesh{}};
  Rng rng_c(1);
  CHECK_THROWS_AS(sample_surface(m, empty, {}, 10, rng_c), Error);
}

TEST_CASE("surface sampling from mesh files on disk") {
  kftest::TempDir tmp("urdfmesh");
  std::filesystem::create_directories(tmp.path / "meshes");
  save_obj(tmp.path / "meshes" / "link_0.obj", unit_square(0.0));
  // The child mesh is authored in rest world coordinates; its visual origin
  // cancels the joint offset, so rest samples land exactly on the square.
  save_obj(tmp.path / "meshes" / "link_1.obj", unit_square(1.0));
  UrdfModel m = two_link_model({"meshes/link_0.obj", "meshes/link_1.obj"});

  PointCloud pts = sample_surface(m, tmp.path, {}, 2000, 5);
  REQUIRE(pts.size() == 2000);
  std::size_t low = 0, high = 0;
  for (const auto& p : pts.pts) {
    CHECK(p.x() >= -1e-9);
    CHECK(p.x() <= 1.0 + 1e-9);
    if (std::abs(p.z()) < 1e-9) ++low;
    if (std::abs(p.z() - 1.0) < 1e-9) ++high;
  }
  CHECK(low + high == pts.size());  // both planes, nothing else
  CHECK(low > 0);
  CHECK(high > 0);

  std::filesystem::remove(tmp.path / "meshes" / "link_1.obj");
  CHECK_THROWS_AS(sample_surface(m, tmp.path, {}, 10, 5), Error);
}

}  // TEST_SUITE
