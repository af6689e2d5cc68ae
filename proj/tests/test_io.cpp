#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "fuzz.hpp"
#include "panoref/errors.hpp"
#include "panoref/io.hpp"

using namespace panoref;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "panoref_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::byte> floats(std::initializer_list<float> v) {
  std::vector<std::byte> out(v.size() * 4);
  std::size_t k = 0;
  for (float f : v) {
    std::memcpy(out.data() + 4 * k++, &f, 4);
  }
  return out;
}

const ClassTable& classes() { return fuzz::table(); }  // road, car (thing), crane (thing, rare)

}  // namespace

TEST_CASE("point cloud single record") {
  const auto c = decode_point_cloud(floats({1, 2, 3, 0.5f, 0}));
  REQUIRE(c.size() == 1);
  CHECK(c.points[0] == Point3{1, 2, 3});
  CHECK(c.intensity[0] == 0.5f);
  CHECK(c.ring[0] == 0);
  CHECK_THROWS_AS(decode_point_cloud({}), FormatError);
  CHECK_THROWS_AS(decode_point_cloud(floats({1, 2, 3, 0.5f})), FormatError);
  CHECK_THROWS_AS(decode_point_cloud(floats({1, NAN, 3, 0.5f, 0})), FormatError);
  CHECK_THROWS_AS(decode_point_cloud(floats({1, 2, 3, 1.5f, 0})), FormatError);
  CHECK_THROWS_AS(decode_point_cloud(floats({1, 2, 3, 0.5f, 2.5f})), FormatError);
  CHECK_THROWS_AS(read_point_cloud(scratch("missing.bin")), IoError);
}

TEST_CASE("point cloud write/read is bit exact") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-100, 100), unit(0, 1);
  PointCloud c;
  for (int i = 0; i < 5000; ++i) {
    c.points.push_back({u(rng), u(rng), u(rng)});
    c.intensity.push_back(unit(rng));
    c.ring.push_back(static_cast<std::uint8_t>(rng() % 256));
  }
  const auto path = scratch("cloud.bin");
  write_point_cloud(c, path);
  CHECK(fs::file_size(path) == 5000 * kPointRecordBytes);
  const auto back = read_point_cloud(path);
  CHECK(back.points == c.points);
  CHECK(back.intensity == c.intensity);
  CHECK(back.ring == c.ring);
}

TEST_CASE("label image decoding") {
  LabelImage zero(4, 3);
  const auto z = decode_label_image(encode_label_image(zero), classes());
  CHECK(z == zero);

  LabelImage img(5, 2);
  img.semantic[7] = SemanticId{2};
  img.instance[7] = InstanceId{7};
  img.semantic[1] = SemanticId{1};
  const auto bytes = encode_label_image(img);
  const auto back = decode_label_image(bytes, classes());
  CHECK(back == img);
  CHECK(encode_label_image(back) == bytes);

  // Pixel 4007 against a table whose class 4 is a thing.
  ClassTable four({{"a", false, false}, {"b", false, false}, {"c", false, false}, {"d", true, false}});
  LabelImage one(1, 1);
  one.semantic[0] = SemanticId{4};
  one.instance[0] = InstanceId{7};
  const auto d = decode_label_image(encode_label_image(one), four);
  CHECK(d.semantic[0].value == 4);
  CHECK(d.instance[0].value == 7);
  // Class 4 does not exist in the three-class table.
  CHECK_THROWS_AS(decode_label_image(encode_label_image(one), classes()), FormatError);
  // Stuff with an instance.
  LabelImage bad(1, 1);
  bad.semantic[0] = SemanticId{1};
  bad.instance[0] = InstanceId{2};
  CHECK_THROWS_AS(decode_label_image(encode_label_image(bad), classes()), FormatError);
  CHECK_THROWS_AS(decode_label_image(fuzz::to_bytes("not a png"), classes()), FormatError);
}

TEST_CASE("calibration and poses") {
  const auto id = parse_poses("1 0 0 0 0 1 0 0 0 0 1 0\n");
  REQUIRE(id.size() == 1);
  CHECK(id[0].rotation() == Eigen::Matrix3d::Identity());
  CHECK(id[0].translation() == Eigen::Vector3d::Zero());

  CHECK_THROWS_AS(parse_calibration("640 480 -1 500 320 240 1 0 0 0 0 1 0 0 0 0 1 0\n"), FormatError);
  CHECK_THROWS_AS(parse_calibration("640 480 500 500 320 240 1 0 0 0 0 1 0 0 0 0 1\n"), FormatError);
  CHECK_THROWS_AS(parse_poses("1 0 0 0 0 1 0 0 0 0 1\n"), FormatError);
  CHECK_THROWS_AS(parse_poses("1 0 0 0 0 1 0 0 0 0 1 x\n"), FormatError);
  CHECK_THROWS_AS(parse_poses("# nothing\n"), FormatError);

  // Off-diagonal perturbation giving a 1e-4 orthonormality error.
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r(0, 1) = 1e-4;
  REQUIRE(orthonormality_error(r) == doctest::Approx(1e-4).epsilon(1e-6));
  char line[256];
  std::snprintf(line, sizeof line, "1 %.17g 0 2  0 1 0 3  0 0 1 4\n", r(0, 1));
  const auto p = parse_poses(line);
  REQUIRE(p.size() == 1);
  CHECK(orthonormality_error(p[0].rotation()) <= 1e-9);
  CHECK(p[0].translation() == Eigen::Vector3d(2, 3, 4));
  // Beyond 1e-3 is rejected.
  CHECK_THROWS_AS(parse_poses("1 0.01 0 0 0 1 0 0 0 0 1 0\n"), FormatError);

  std::vector<CameraModel> cams{CameraModel(500, 501, 320.5, 240.25, 640, 480,
                                            RigidTransform::from_yaw_translation(0.4, {1, 2, 3}))};
  const auto cams2 = parse_calibration(format_calibration(cams));
  REQUIRE(cams2.size() == 1);
  CHECK(cams2[0].fx() == 500);
  CHECK(cams2[0].fy() == 501);
  CHECK(cams2[0].cx() == 320.5);
  CHECK(cams2[0].width() == 640);
  CHECK(cams2[0].extrinsic().rotation() == cams[0].extrinsic().rotation());
  CHECK(cams2[0].extrinsic().translation() == cams[0].extrinsic().translation());

  std::vector<RigidTransform> poses{RigidTransform::from_yaw_translation(2.0, {-7.25, 1.5, 0.125})};
  const auto poses2 = parse_poses(format_poses(poses));
  CHECK(poses2[0].rotation() == poses[0].rotation());
  CHECK(poses2[0].translation() == poses[0].translation());
}

TEST_CASE("point labels") {
  PanopticLabels l;
  l.push_back(kVoid, kNoInstance);
  l.push_back(SemanticId{2}, InstanceId{7});
  const auto bytes = encode_labels(l);
  REQUIRE(bytes.size() == 8);
  for (int i = 0; i < 4; ++i) CHECK(bytes[i] == std::byte{0});
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + 4, 4);
  CHECK(v == 2007u);

  PanopticLabels unknown;
  unknown.push_back(SemanticId{2}, kUnknownInstance);
  CHECK_THROWS_AS(encode_labels(unknown), SerializationError);

  // 4007 packing against a four-class table.
  ClassTable four({{"a", false, false}, {"b", false, false}, {"c", false, false}, {"d", true, false}});
  PanopticLabels one;
  one.push_back(SemanticId{4}, InstanceId{7});
  std::memcpy(&v, encode_labels(one).data(), 4);
  CHECK(v == 4007u);

  std::mt19937_64 rng(9);
  PanopticLabels big;
  for (int i = 0; i < 100000; ++i) {
    const auto s = static_cast<std::uint16_t>(rng() % 4);
    big.push_back(SemanticId{s}, InstanceId{static_cast<std::uint16_t>(s >= 2 ? rng() % 1000 : 0)});
  }
  const auto path = scratch("big.label");
  write_labels(big, path);
  CHECK(read_labels(path, classes()) == big);
}

TEST_CASE("class table json") {
  const auto text = format_class_table(classes());
  CHECK(parse_class_table(text) == classes());
  CHECK_THROWS_AS(parse_class_table("{\"classes\": []}"), FormatError);
  CHECK_THROWS_AS(parse_class_table("{"), FormatError);
  CHECK_THROWS_AS(parse_class_table("{\"classes\": [{\"name\": 3}]}"), FormatError);
}

TEST_CASE("reader fuzzing yields only structured errors") {
  const auto out = fuzz::run(600, 77, fs::temp_directory_path() / "panoref_test_fuzz");
  for (const auto& n : out.notes) MESSAGE(n);
  CHECK(out.ok());
  CHECK(out.rejected > 0);
}
