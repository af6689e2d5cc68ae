#include "panoref/io.hpp"

#include <png.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <csetjmp>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "panoref/errors.hpp"

namespace panoref {

namespace {

std::uint32_t load_u32_le(const std::byte* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(std::vector<std::byte>& out, std::uint32_t v) {
  out.push_back(static_cast<std::byte>(v & 0xFF));
  out.push_back(static_cast<std::byte>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::byte>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::byte>((v >> 24) & 0xFF));
}

float load_f32_le(const std::byte* p) { return std::bit_cast<float>(load_u32_le(p)); }
void store_f32_le(std::vector<std::byte>& out, float v) { store_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

void check_label_pair(SemanticId s, InstanceId i, const ClassTable& table, const char* what) {
  if (!table.contains(s))
    throw FormatError(std::string(what) + ": semantic id " + std::to_string(s.value) +
                      " outside the class table");
  if (!table.is_thing(s) && i != kNoInstance)
    throw FormatError(std::string(what) + ": stuff or void label carries instance " +
                      std::to_string(i.value));
}

// ---------------------------------------------------------------- text parsing

std::vector<std::vector<double>> parse_number_lines(std::string_view text, const char* what) {
  std::vector<std::vector<double>> lines;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::vector<double> values;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
      double v = 0.0;
      const auto token = line.substr(i, j - i);
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v))
        throw FormatError(std::string(what) + ": bad number '" + std::string(token) + "' on line " +
                          std::to_string(line_no));
      values.push_back(v);
      i = j;
    }
    if (!values.empty()) lines.push_back(std::move(values));
    if (end == text.size()) break;
  }
  return lines;
}

RigidTransform transform_from_rows(std::span<const double> v, const char* what) {
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 3; ++c) r(row, c) = v[row * 4 + c];
    t(row) = v[row * 4 + 3];
  }
  auto transform = RigidTransform::orthonormalized(r, t, kFileRotationTolerance);
  if (!transform) throw FormatError(std::string(what) + ": rotation is not orthonormal within 1e-3");
  return *transform;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

// ---------------------------------------------------------------- PNG plumbing

struct PngSource {
  std::span<const std::byte> data;
  std::size_t offset{0};
};

struct PngSink {
  std::vector<std::byte>* out;
};

struct PngErrorState {
  char message[256]{};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg ? msg : "libpng error");
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void png_read_callback(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->data.size() - src->offset < n) png_error(png, "truncated PNG data");
  std::memcpy(out, src->data.data() + src->offset, n);
  src->offset += n;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t n) {
  auto* sink = static_cast<PngSink*>(png_get_io_ptr(png));
  const auto* p = reinterpret_cast<const std::byte*>(data);
  sink->out->insert(sink->out->end(), p, p + n);
}

void png_flush_callback(png_structp) {}

inline constexpr png_uint_32 kMaxImageSide = 8192;
inline constexpr std::size_t kMaxImagePixels = std::size_t{1} << 25;

struct DecodedGray16 {
  png_uint_32 width{0};
  png_uint_32 height{0};
  std::vector<std::uint16_t> pixels;
  std::vector<png_byte> row;
  const char* failure{nullptr};
};

// All state touched after setjmp lives behind `out` so it survives a longjmp.
bool decode_gray16(png_structp png, png_infop info, DecodedGray16* out) {
  if (setjmp(png_jmpbuf(png))) return false;

  png_set_user_limits(png, kMaxImageSide, kMaxImageSide);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    out->failure = "label image must be a 16-bit single-channel PNG";
    return false;
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    out->failure = "interlaced label images are not supported";
    return false;
  }
  if (static_cast<std::size_t>(w) * h > kMaxImagePixels) {
    out->failure = "label image too large";
    return false;
  }
  out->width = w;
  out->height = h;
  out->pixels.resize(static_cast<std::size_t>(w) * h);
  out->row.resize(static_cast<std::size_t>(w) * 2);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, out->row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      out->pixels[static_cast<std::size_t>(y) * w + x] =
          static_cast<std::uint16_t>((out->row[2 * x] << 8) | out->row[2 * x + 1]);
  }
  png_read_end(png, nullptr);
  return true;
}

bool encode_gray16(png_structp png, png_infop info, const std::vector<std::uint16_t>* pixels,
                   png_uint_32 w, png_uint_32 h, std::vector<png_byte>* row) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  row->resize(static_cast<std::size_t>(w) * 2);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      const std::uint16_t v = (*pixels)[static_cast<std::size_t>(y) * w + x];
      (*row)[2 * x] = static_cast<png_byte>(v >> 8);
      (*row)[2 * x + 1] = static_cast<png_byte>(v & 0xFF);
    }
    png_write_row(png, row->data());
  }
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

// ------------------------------------------------------------------ PointCloud

void PointCloud::validate() const {
  if (points.empty()) throw InvariantViolation("point cloud is empty");
  if (!intensity.empty() && intensity.size() != points.size())
    throw InvariantViolation("intensity array length differs from point count");
  if (!ring.empty() && ring.size() != points.size())
    throw InvariantViolation("ring array length differs from point count");
  for (const auto& p : points)
    if (!p.finite()) throw InvariantViolation("non-finite point coordinate");
  for (float v : intensity)
    if (!(v >= 0.0f && v <= 1.0f)) throw InvariantViolation("intensity outside [0, 1]");
}

PointCloud decode_point_cloud(std::span<const std::byte> bytes, std::string scan_id) {
  if (bytes.empty()) throw FormatError("point cloud file is empty");
  if (bytes.size() % kPointRecordBytes != 0)
    throw FormatError("point cloud size " + std::to_string(bytes.size()) +
                      " is not a multiple of 20 bytes");
  const std::size_t n = bytes.size() / kPointRecordBytes;
  PointCloud cloud;
  cloud.scan_id = std::move(scan_id);
  cloud.points.resize(n);
  cloud.intensity.resize(n);
  cloud.ring.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::byte* rec = bytes.data() + i * kPointRecordBytes;
    Point3 p{load_f32_le(rec), load_f32_le(rec + 4), load_f32_le(rec + 8)};
    if (!p.finite()) throw FormatError("non-finite coordinate in point " + std::to_string(i));
    const float intensity = load_f32_le(rec + 12);
    if (!(intensity >= 0.0f && intensity <= 1.0f))
      throw FormatError("intensity outside [0, 1] in point " + std::to_string(i));
    const float ring = load_f32_le(rec + 16);
    if (!(ring >= 0.0f && ring <= 255.0f) || ring != std::floor(ring))
      throw FormatError("ring is not an integer in [0, 255] in point " + std::to_string(i));
    cloud.points[i] = p;
    cloud.intensity[i] = intensity;
    cloud.ring[i] = static_cast<std::uint8_t>(ring);
  }
  return cloud;
}

std::vector<std::byte> encode_point_cloud(const PointCloud& cloud) {
  cloud.validate();
  std::vector<std::byte> out;
  out.reserve(cloud.size() * kPointRecordBytes);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    store_f32_le(out, cloud.points[i].x);
    store_f32_le(out, cloud.points[i].y);
    store_f32_le(out, cloud.points[i].z);
    store_f32_le(out, cloud.intensity.empty() ? 0.0f : cloud.intensity[i]);
    store_f32_le(out, cloud.ring.empty() ? 0.0f : static_cast<float>(cloud.ring[i]));
  }
  return out;
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  return decode_point_cloud(read_file_bytes(path), path.stem().string());
}

void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_file_bytes(path, encode_point_cloud(cloud));
}

// ------------------------------------------------------------------ LabelImage

LabelImage decode_label_image(std::span<const std::byte> bytes, const ClassTable& table) {
  if (bytes.size() < 8 ||
      png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
    throw FormatError("label image is not a PNG file");

  PngErrorState error_state;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_state,
                                           png_error_handler, png_warning_handler);
  if (!png) throw FormatError("cannot allocate PNG reader");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("cannot allocate PNG info");
  }
  PngSource source{bytes, 0};
  png_set_read_fn(png, &source, png_read_callback);

  DecodedGray16 decoded;
  const bool ok = decode_gray16(png, info, &decoded);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok)
    throw FormatError(std::string("label image: ") +
                      (decoded.failure ? decoded.failure : error_state.message));
  if (decoded.width == 0 || decoded.height == 0) throw FormatError("label image has zero size");

  LabelImage image(static_cast<int>(decoded.width), static_cast<int>(decoded.height));
  for (std::size_t i = 0; i < decoded.pixels.size(); ++i) {
    const auto [s, inst] = unpack_label(decoded.pixels[i]);
    check_label_pair(s, inst, table, "label image");
    image.semantic[i] = s;
    image.instance[i] = inst;
  }
  return image;
}

std::vector<std::byte> encode_label_image(const LabelImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.semantic.size() != static_cast<std::size_t>(image.width) * image.height ||
      image.instance.size() != image.semantic.size())
    throw SerializationError("label image arrays do not match its size");
  std::vector<std::uint16_t> pixels(image.semantic.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const std::uint32_t packed = pack_label(image.semantic[i], image.instance[i]);
    if (packed > 0xFFFF) throw SerializationError("label does not fit a 16-bit pixel");
    pixels[i] = static_cast<std::uint16_t>(packed);
  }

  std::vector<std::byte> out;
  PngErrorState error_state;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error_state,
                                            png_error_handler, png_warning_handler);
  if (!png) throw SerializationError("cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw SerializationError("cannot allocate PNG info");
  }
  PngSink sink{&out};
  png_set_write_fn(png, &sink, png_write_callback, png_flush_callback);
  std::vector<png_byte> row;
  const bool ok = encode_gray16(png, info, &pixels, static_cast<png_uint_32>(image.width),
                                static_cast<png_uint_32>(image.height), &row);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw SerializationError(std::string("PNG encoding failed: ") + error_state.message);
  return out;
}

LabelImage read_label_image(const std::filesystem::path& path, const ClassTable& table) {
  return decode_label_image(read_file_bytes(path), table);
}

void write_label_image(const LabelImage& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_label_image(image));
}

// ------------------------------------------------------- calibration and poses

std::vector<CameraModel> parse_calibration(std::string_view text) {
  std::vector<CameraModel> cameras;
  for (const auto& v : parse_number_lines(text, "calibration")) {
    if (v.size() != 18)
      throw FormatError("calibration: expected 18 values per camera, got " + std::to_string(v.size()));
    if (v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]) || v[0] < 1 || v[1] < 1 ||
        v[0] > 1e6 || v[1] > 1e6)
      throw FormatError("calibration: image size must be a positive integer");
    const RigidTransform extrinsic = transform_from_rows(std::span(v).subspan(6, 12), "calibration");
    try {
      cameras.emplace_back(v[2], v[3], v[4], v[5], static_cast<int>(v[0]), static_cast<int>(v[1]),
                           extrinsic);
    } catch (const InvariantViolation& e) {
      throw FormatError(std::string("calibration: ") + e.what());
    }
  }
  if (cameras.empty()) throw FormatError("calibration: no cameras");
  return cameras;
}

std::string format_calibration(std::span<const CameraModel> cameras) {
  std::string out = "# width height fx fy cx cy | extrinsic LiDAR->camera [R|t] row-major\n";
  for (const auto& cam : cameras) {
    out += std::to_string(cam.width()) + ' ' + std::to_string(cam.height());
    for (double v : {cam.fx(), cam.fy(), cam.cx(), cam.cy()}) {
      out += ' ';
      append_number(out, v);
    }
    for (double v : cam.extrinsic().to_rows()) {
      out += ' ';
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

std::vector<CameraModel> read_calibration(const std::filesystem::path& path) {
  return parse_calibration(read_file_text(path));
}

void write_calibration(std::span<const CameraModel> cameras, const std::filesystem::path& path) {
  write_file_text(path, format_calibration(cameras));
}

std::vector<RigidTransform> parse_poses(std::string_view text) {
  std::vector<RigidTransform> poses;
  for (const auto& v : parse_number_lines(text, "poses")) {
    if (v.size() != 12)
      throw FormatError("poses: expected 12 values per pose, got " + std::to_string(v.size()));
    poses.push_back(transform_from_rows(v, "poses"));
  }
  if (poses.empty()) throw FormatError("poses: no poses");
  return poses;
}

std::string format_poses(std::span<const RigidTransform> poses) {
  std::string out;
  for (const auto& pose : poses) {
    bool first = true;
    for (double v : pose.to_rows()) {
      if (!first) out += ' ';
      first = false;
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

std::vector<RigidTransform> read_poses(const std::filesystem::path& path) {
  return parse_poses(read_file_text(path));
}

void write_poses(std::span<const RigidTransform> poses, const std::filesystem::path& path) {
  write_file_text(path, format_poses(poses));
}

// ---------------------------------------------------------------- point labels

PanopticLabels decode_labels(std::span<const std::byte> bytes, const ClassTable& table) {
  if (bytes.empty()) throw FormatError("label file is empty");
  if (bytes.size() % 4 != 0) throw FormatError("label file size is not a multiple of 4 bytes");
  const std::size_t n = bytes.size() / 4;
  PanopticLabels labels;
  labels.semantic.resize(n);
  labels.instance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t packed = load_u32_le(bytes.data() + 4 * i);
    if (packed / kLabelModulus > table.size())
      throw FormatError("label " + std::to_string(i) + ": semantic id outside the class table");
    const auto [s, inst] = unpack_label(packed);
    check_label_pair(s, inst, table, "labels");
    labels.semantic[i] = s;
    labels.instance[i] = inst;
  }
  return labels;
}

std::vector<std::byte> encode_labels(const PanopticLabels& labels) {
  if (labels.semantic.size() != labels.instance.size())
    throw SerializationError("semantic and instance arrays differ in length");
  std::vector<std::byte> out;
  out.reserve(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i)
    store_u32_le(out, pack_label(labels.semantic[i], labels.instance[i]));
  return out;
}

PanopticLabels read_labels(const std::filesystem::path& path, const ClassTable& table) {
  return decode_labels(read_file_bytes(path), table);
}

void write_labels(const PanopticLabels& labels, const std::filesystem::path& path) {
  write_file_bytes(path, encode_labels(labels));
}

// ----------------------------------------------------------------- class table

ClassTable parse_class_table(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    std::vector<ClassInfo> classes;
    for (const auto& c : doc.at("classes")) {
      ClassInfo info;
      info.name = c.at("name").get<std::string>();
      info.thing = c.at("thing").get<bool>();
      info.rare = c.value("rare", false);
      classes.push_back(std::move(info));
    }
    return ClassTable(std::move(classes));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("class table: ") + e.what());
  } catch (const InvariantViolation& e) {
    throw FormatError(std::string("class table: ") + e.what());
  }
}

std::string format_class_table(const ClassTable& table) {
  nlohmann::json doc;
  doc["classes"] = nlohmann::json::array();
  for (const auto& c : table.classes())
    doc["classes"].push_back({{"name", c.name}, {"thing", c.thing}, {"rare", c.rare}});
  return doc.dump(2) + "\n";
}

ClassTable read_class_table(const std::filesystem::path& path) {
  return parse_class_table(read_file_text(path));
}

void write_class_table(const ClassTable& table, const std::filesystem::path& path) {
  write_file_text(path, format_class_table(table));
}

// ------------------------------------------------------------------ file utils

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size < 0) throw IoError("cannot determine size of " + path.string());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size))
    throw IoError("short read on " + path.string());
  return bytes;
}

std::string read_file_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

void write_file_text(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

}  // namespace panoref
