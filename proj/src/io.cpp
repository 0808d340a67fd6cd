#include "l2mreg/io.hpp"

#include "l2mreg/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <string_view>

namespace l2mreg {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

std::ifstream open_input(const std::filesystem::path& path,
                         std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorKind::kIo, "cannot open for reading", path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path,
                          std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing", path.string());
  return out;
}

void check_finite(const Vec3& p, std::size_t line) {
  if (!p.allFinite()) throw Error(ErrorKind::kParse, "non-finite coordinate", {}, line);
}

// --- PLY ------------------------------------------------------------------

enum class PlyType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

std::optional<PlyType> ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::kI8;
  if (name == "uchar" || name == "uint8") return PlyType::kU8;
  if (name == "short" || name == "int16") return PlyType::kI16;
  if (name == "ushort" || name == "uint16") return PlyType::kU16;
  if (name == "int" || name == "int32") return PlyType::kI32;
  if (name == "uint" || name == "uint32") return PlyType::kU32;
  if (name == "float" || name == "float32") return PlyType::kF32;
  if (name == "double" || name == "float64") return PlyType::kF64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::kI8:
    case PlyType::kU8: return 1;
    case PlyType::kI16:
    case PlyType::kU16: return 2;
    case PlyType::kI32:
    case PlyType::kU32:
    case PlyType::kF32: return 4;
    case PlyType::kF64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  static_assert(std::endian::native == std::endian::little,
                "binary PLY support assumes a little-endian host");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double ply_value(PlyType t, const char* p) {
  switch (t) {
    case PlyType::kI8: return load_le<std::int8_t>(p);
    case PlyType::kU8: return load_le<std::uint8_t>(p);
    case PlyType::kI16: return load_le<std::int16_t>(p);
    case PlyType::kU16: return load_le<std::uint16_t>(p);
    case PlyType::kI32: return load_le<std::int32_t>(p);
    case PlyType::kU32: return load_le<std::uint32_t>(p);
    case PlyType::kF32: return load_le<float>(p);
    case PlyType::kF64: return load_le<double>(p);
  }
  return 0.0;
}

PointCloud read_ply(std::istream& in, const Vec3& origin) {
  struct Property {
    std::string name;
    PlyType type;
  };
  std::string line;
  std::size_t line_no = 0;
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<Property> props;
  std::string format;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format" && tok.size() >= 2) {
      format = std::string(tok[1]);
    } else if (tok[0] == "element" && tok.size() == 3) {
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw Error(ErrorKind::kParse, "duplicate vertex element", {}, line_no);
        seen_vertex = true;
        vertex_count = std::stoull(std::string(tok[2]));
      } else if (!seen_vertex) {
        throw Error(ErrorKind::kParse, "vertex element must come first", {}, line_no);
      }
    } else if (tok[0] == "property" && in_vertex) {
      if (tok.size() != 3) {
        throw Error(ErrorKind::kParse, "list properties are not supported", {}, line_no);
      }
      const auto type = ply_type(tok[1]);
      if (!type) throw Error(ErrorKind::kParse, "unknown PLY type", {}, line_no);
      props.push_back({std::string(tok[2]), *type});
    }
  }
  if (format != "binary_little_endian") {
    throw Error(ErrorKind::kParse, "only binary_little_endian PLY is supported");
  }
  int ix = -1, iy = -1, iz = -1, ii = -1;
  std::size_t stride = 0;
  std::vector<std::size_t> offsets;
  for (std::size_t k = 0; k < props.size(); ++k) {
    offsets.push_back(stride);
    stride += ply_size(props[k].type);
    if (props[k].name == "x") ix = static_cast<int>(k);
    if (props[k].name == "y") iy = static_cast<int>(k);
    if (props[k].name == "z") iz = static_cast<int>(k);
    if (props[k].name == "intensity" || props[k].name == "scalar_intensity") {
      ii = static_cast<int>(k);
    }
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    throw Error(ErrorKind::kParse, "PLY vertex element lacks x/y/z");
  }
  if (vertex_count == 0) throw Error(ErrorKind::kEmptyCloud, "PLY has no vertices");
  std::vector<char> buffer(vertex_count * stride);
  in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
    throw Error(ErrorKind::kParse, "PLY body truncated");
  }
  PointCloud cloud;
  cloud.points.resize(vertex_count);
  if (ii >= 0) cloud.intensity.resize(vertex_count);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    const char* rec = buffer.data() + v * stride;
    const Vec3 p(ply_value(props[ix].type, rec + offsets[ix]),
                 ply_value(props[iy].type, rec + offsets[iy]),
                 ply_value(props[iz].type, rec + offsets[iz]));
    if (!p.allFinite()) throw Error(ErrorKind::kParse, "non-finite PLY vertex " + std::to_string(v));
    cloud.points[v] = p - origin;
    if (ii >= 0) cloud.intensity[v] = ply_value(props[ii].type, rec + offsets[ii]);
  }
  return cloud;
}

// --- JSON helpers ----------------------------------------------------------

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorKind::kParse, what + " must be an array of 3 numbers");
  }
  for (const auto& e : j) {
    if (!e.is_number()) throw Error(ErrorKind::kParse, what + " must be numeric");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered_json num_json(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double json_num(const nlohmann::json& j) {
  if (j.is_null()) return kNaN;
  return j.get<double>();
}

ordered_json transform_json(const RigidTransform& t) {
  ordered_json j;
  const Quaternion& q = t.rotation;
  j["quaternion"] = ordered_json::array({q.q0, q.q1, q.q2, q.q3});
  j["translation"] = vec_json(t.translation);
  ordered_json m = ordered_json::array();
  const Mat4 mat = t.matrix();
  for (int r = 0; r < 4; ++r) {
    m.push_back(ordered_json::array({mat(r, 0), mat(r, 1), mat(r, 2), mat(r, 3)}));
  }
  j["matrix"] = m;
  return j;
}

RigidTransform json_transform(const nlohmann::json& j) {
  const auto& q = j.at("quaternion");
  if (!q.is_array() || q.size() != 4) {
    throw Error(ErrorKind::kParse, "quaternion must have 4 components");
  }
  RigidTransform t;
  t.rotation = Quaternion{q[0].get<double>(), q[1].get<double>(),
                          q[2].get<double>(), q[3].get<double>()};
  if (j.contains("translation")) {
    t.translation = json_vec(j.at("translation"), "translation");
  } else {
    const auto& m = j.at("matrix");
    t.translation = {m[0][3].get<double>(), m[1][3].get<double>(),
                     m[2][3].get<double>()};
  }
  return t;
}

}  // namespace

// --- DtmGrid ----------------------------------------------------------------

Vec3 DtmGrid::cell_center(int col, int row) const {
  return {origin_x + (col + 0.5) * cell_size,
          origin_y + (n_rows - row - 0.5) * cell_size, at(col, row)};
}

double DtmGrid::sample(double x, double y) const {
  if (n_cols <= 0 || n_rows <= 0) return kNaN;
  const double fx = (x - origin_x) / cell_size;
  const double fy = (y - origin_y) / cell_size;
  if (fx < 0.0 || fy < 0.0 || fx > n_cols || fy > n_rows) return kNaN;
  // Continuous column/row-from-south coordinates of cell centers.
  const double cx = std::clamp(fx - 0.5, 0.0, static_cast<double>(n_cols - 1));
  const double cy = std::clamp(fy - 0.5, 0.0, static_cast<double>(n_rows - 1));
  const int c0 = std::min(static_cast<int>(std::floor(cx)), std::max(n_cols - 2, 0));
  const int s0 = std::min(static_cast<int>(std::floor(cy)), std::max(n_rows - 2, 0));
  const int c1 = std::min(c0 + 1, n_cols - 1);
  const int s1 = std::min(s0 + 1, n_rows - 1);
  const double tx = cx - c0;
  const double ty = cy - s0;
  // Row index counts from the north.
  auto z = [&](int c, int s) { return at(c, n_rows - 1 - s); };
  const double z00 = z(c0, s0), z10 = z(c1, s0), z01 = z(c0, s1), z11 = z(c1, s1);
  const double w00 = (1 - tx) * (1 - ty), w10 = tx * (1 - ty);
  const double w01 = (1 - tx) * ty, w11 = tx * ty;
  double sum = 0.0;
  for (auto [zv, wv] : {std::pair{z00, w00}, std::pair{z10, w10},
                        std::pair{z01, w01}, std::pair{z11, w11}}) {
    if (wv == 0.0) continue;
    if (std::isnan(zv)) return kNaN;
    sum += wv * zv;
  }
  return sum;
}

// --- point clouds -----------------------------------------------------------

PointCloud parse_point_cloud_ascii(std::istream& in, const Vec3& origin) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  std::size_t arity = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    const auto tok = split_ws(view);
    if (tok.empty()) continue;
    if (tok.size() != 3 && tok.size() != 4) {
      throw Error(ErrorKind::kParse,
                  "expected 3 or 4 columns, got " + std::to_string(tok.size()),
                  {}, line_no);
    }
    if (arity == 0) arity = tok.size();
    if (tok.size() != arity) {
      throw Error(ErrorKind::kParse, "column count differs from first row", {},
                  line_no);
    }
    double v[4] = {0, 0, 0, 0};
    for (std::size_t k = 0; k < tok.size(); ++k) {
      if (!parse_double(tok[k], v[k])) {
        throw Error(ErrorKind::kParse, "malformed number '" + std::string(tok[k]) + "'",
                    {}, line_no);
      }
    }
    const Vec3 p(v[0], v[1], v[2]);
    check_finite(p, line_no);
    cloud.points.push_back(p - origin);
    if (arity == 4) cloud.intensity.push_back(v[3]);
  }
  if (cloud.points.empty()) throw Error(ErrorKind::kEmptyCloud, "no points");
  return cloud;
}

PointCloud read_point_cloud(const std::filesystem::path& path, const Vec3& origin) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.clear();
  in.seekg(0);
  try {
    if (std::string_view(magic, 4) == "ply\n" || std::string_view(magic, 4) == "ply\r") {
      return read_ply(in, origin);
    }
    return parse_point_cloud_ascii(in, origin);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kParse || e.kind() == ErrorKind::kEmptyCloud) {
      throw Error(e.kind(), e.what(), path.string(), e.line());
    }
    throw;
  }
}

void write_point_cloud_ascii(const std::filesystem::path& path,
                             const PointCloud& cloud, const Vec3& origin) {
  auto out = open_output(path);
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud.points[i] + origin;
    int n = 0;
    if (cloud.has_intensity()) {
      n = std::snprintf(buf, sizeof buf, "%.9f %.9f %.9f %.6g\n", p.x(), p.y(),
                        p.z(), cloud.intensity[i]);
    } else {
      n = std::snprintf(buf, sizeof buf, "%.9f %.9f %.9f\n", p.x(), p.y(), p.z());
    }
    out.write(buf, n);
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed", path.string());
}

void write_point_cloud_ply(const std::filesystem::path& path,
                           const PointCloud& cloud, const Vec3& origin) {
  auto out = open_output(path, std::ios::out | std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_intensity()) out << "property float intensity\n";
  out << "end_header\n";
  const std::size_t stride = 24 + (cloud.has_intensity() ? 4 : 0);
  std::vector<char> buffer(cloud.size() * stride);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    char* rec = buffer.data() + i * stride;
    const Vec3 p = cloud.points[i] + origin;
    std::memcpy(rec, p.data(), 24);
    if (cloud.has_intensity()) {
      const float f = static_cast<float>(cloud.intensity[i]);
      std::memcpy(rec + 24, &f, 4);
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed", path.string());
}

// --- wall model -------------------------------------------------------------

WallSurface make_wall(std::string id, std::vector<Vec3> vertices) {
  if (vertices.size() < 3) {
    throw Error(ErrorKind::kParse, "wall needs at least 3 vertices", id);
  }
  PlaneParams plane;
  try {
    plane = fit_plane(vertices);
  } catch (const Error&) {
    throw Error(ErrorKind::kParse, "wall vertices are collinear", id);
  }
  for (const auto& v : vertices) {
    if (point_plane_distance(v, plane) > kWallPlanarityTolerance) {
      throw Error(ErrorKind::kNonPlanarPolygon,
                  "vertex deviates from the wall plane by more than 1 mm", id);
    }
  }
  return {std::move(id), std::move(vertices), plane};
}

WallModel parse_wall_model(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
  WallModel model;
  try {
    if (j.contains("local_origin")) {
      model.local_origin = json_vec(j.at("local_origin"), "local_origin");
    }
    std::set<std::string> seen;
    for (const auto& w : j.at("walls")) {
      std::string id = w.at("id").get<std::string>();
      if (!seen.insert(id).second) {
        throw Error(ErrorKind::kDuplicateId, "wall id appears twice", id);
      }
      std::vector<Vec3> vertices;
      for (const auto& v : w.at("vertices")) {
        vertices.push_back(json_vec(v, "vertex") - model.local_origin);
      }
      model.walls.push_back(make_wall(std::move(id), std::move(vertices)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
  return model;
}

WallModel read_wall_model(const std::filesystem::path& path) {
  return parse_wall_model(read_text_file(path));
}

std::string wall_model_to_json(const WallModel& model) {
  ordered_json j;
  j["local_origin"] = vec_json(model.local_origin);
  j["walls"] = ordered_json::array();
  for (const auto& w : model.walls) {
    ordered_json jw;
    jw["id"] = w.id;
    jw["vertices"] = ordered_json::array();
    for (const auto& v : w.vertices) jw["vertices"].push_back(vec_json(v + model.local_origin));
    j["walls"].push_back(jw);
  }
  return j.dump(2) + "\n";
}

void write_wall_model(const std::filesystem::path& path, const WallModel& model) {
  write_text_file(path, wall_model_to_json(model));
}

// --- DTM --------------------------------------------------------------------

DtmGrid parse_dtm(std::istream& in, const Vec3& origin) {
  DtmGrid dtm;
  std::optional<double> nodata;
  bool has_cols = false, has_rows = false, has_x = false, has_y = false,
       has_cell = false;
  bool x_center = false, y_center = false;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  bool in_body = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (!in_body) {
      std::string key(tok[0]);
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      const bool is_key = std::isalpha(static_cast<unsigned char>(key[0]));
      if (is_key) {
        double v = 0.0;
        if (tok.size() != 2 || !parse_double(tok[1], v)) {
          throw Error(ErrorKind::kParse, "malformed header line", {}, line_no);
        }
        if (key == "ncols") { dtm.n_cols = static_cast<int>(v); has_cols = true; }
        else if (key == "nrows") { dtm.n_rows = static_cast<int>(v); has_rows = true; }
        else if (key == "xllcorner") { dtm.origin_x = v; has_x = true; }
        else if (key == "yllcorner") { dtm.origin_y = v; has_y = true; }
        else if (key == "xllcenter") { dtm.origin_x = v; has_x = x_center = true; }
        else if (key == "yllcenter") { dtm.origin_y = v; has_y = y_center = true; }
        else if (key == "cellsize") { dtm.cell_size = v; has_cell = true; }
        else if (key == "nodata_value") { nodata = v; }
        else throw Error(ErrorKind::kParse, "unknown header key '" + key + "'", {}, line_no);
        continue;
      }
      in_body = true;
      if (!(has_cols && has_rows && has_x && has_y && has_cell)) {
        throw Error(ErrorKind::kParse, "incomplete ESRI grid header", {}, line_no);
      }
      if (dtm.n_cols <= 0 || dtm.n_rows <= 0 || !(dtm.cell_size > 0.0)) {
        throw Error(ErrorKind::kParse, "grid dimensions must be positive", {}, line_no);
      }
    }
    if (tok.size() != static_cast<std::size_t>(dtm.n_cols)) {
      throw Error(ErrorKind::kInconsistentDimensions,
                  "row has " + std::to_string(tok.size()) + " values, header says " +
                      std::to_string(dtm.n_cols),
                  {}, line_no);
    }
    for (const auto t : tok) {
      double v = 0.0;
      if (!parse_double(t, v)) {
        throw Error(ErrorKind::kParse, "malformed elevation", {}, line_no);
      }
      if (nodata && v == *nodata) v = kNaN;
      values.push_back(std::isnan(v) ? kNaN : v - origin.z());
    }
  }
  if (!in_body) throw Error(ErrorKind::kParse, "grid has no data rows");
  if (values.size() != static_cast<std::size_t>(dtm.n_cols) * dtm.n_rows) {
    throw Error(ErrorKind::kInconsistentDimensions,
                "expected " + std::to_string(dtm.n_rows) + " rows, got " +
                    std::to_string(values.size() / dtm.n_cols));
  }
  if (x_center) dtm.origin_x -= 0.5 * dtm.cell_size;
  if (y_center) dtm.origin_y -= 0.5 * dtm.cell_size;
  dtm.origin_x -= origin.x();
  dtm.origin_y -= origin.y();
  dtm.elevations = std::move(values);
  return dtm;
}

DtmGrid read_dtm(const std::filesystem::path& path, const Vec3& origin) {
  auto in = open_input(path);
  try {
    return parse_dtm(in, origin);
  } catch (const Error& e) {
    throw Error(e.kind(), e.what(), path.string(), e.line());
  }
}

void write_dtm(const std::filesystem::path& path, const DtmGrid& dtm,
               const Vec3& origin) {
  constexpr double kNoData = -9999.0;
  auto out = open_output(path);
  char buf[64];
  out << "ncols " << dtm.n_cols << "\nnrows " << dtm.n_rows << "\n";
  std::snprintf(buf, sizeof buf, "%.9f", dtm.origin_x + origin.x());
  out << "xllcorner " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.9f", dtm.origin_y + origin.y());
  out << "yllcorner " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", dtm.cell_size);
  out << "cellsize " << buf << "\nNODATA_value -9999\n";
  for (int r = 0; r < dtm.n_rows; ++r) {
    for (int c = 0; c < dtm.n_cols; ++c) {
      const double z = dtm.at(c, r);
      std::snprintf(buf, sizeof buf, "%.9f", std::isnan(z) ? kNoData : z + origin.z());
      if (c > 0) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed", path.string());
}

// --- report -----------------------------------------------------------------

std::string report_to_json(const RegistrationReport& r) {
  ordered_json j;
  j["version"] = r.version;
  j["local_origin"] = vec_json(r.local_origin);
  const ordered_json tj = transform_json(r.transform);
  j["quaternion"] = tj["quaternion"];
  j["translation"] = tj["translation"];
  j["matrix"] = tj["matrix"];
  ordered_json stage;
  stage["status"] = r.t_z_stage.status;
  stage["t_z"] = r.t_z_stage.t_z;
  stage["pairs"] = r.t_z_stage.pairs;
  j["t_z_stage"] = stage;
  j["stage1"] = transform_json(r.stage1);
  ordered_json solver;
  solver["iterations"] = r.solver.iterations;
  solver["pseudo_plane"] = r.solver.pseudo_plane;
  solver["variance_factor"] = num_json(r.solver.variance_factor);
  solver["redundancy"] = r.solver.redundancy;
  solver["raw_t_z"] = r.solver.raw_t_z;
  j["solver"] = solver;
  j["per_wall"] = ordered_json::array();
  for (const auto& w : r.per_wall) {
    ordered_json jw;
    jw["id"] = w.id;
    jw["status"] = w.status;
    jw["neighbor_points"] = w.neighbor_points;
    jw["subspace_points"] = w.subspace_points;
    jw["segment_points"] = w.segment_points;
    jw["cutoff_range"] = ordered_json::array({num_json(w.cutoff_z_min), num_json(w.cutoff_z_max)});
    jw["rms_residual"] = num_json(w.rms_residual);
    j["per_wall"].push_back(jw);
  }
  ordered_json metrics = ordered_json::object();
  if (r.metrics) {
    metrics["status"] = r.metrics->status;
    metrics["err_h"] = num_json(r.metrics->err_h);
    metrics["err_v"] = num_json(r.metrics->err_v);
    metrics["std_h"] = num_json(r.metrics->std_h);
    metrics["std_v"] = num_json(r.metrics->std_v);
    metrics["n_h"] = r.metrics->n_h;
    metrics["n_v"] = r.metrics->n_v;
  }
  j["metrics"] = metrics;
  return j.dump(2) + "\n";
}

RegistrationReport report_from_json(const std::string& text) {
  RegistrationReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.version = j.at("version").get<int>();
    if (r.version != kReportVersion) {
      throw Error(ErrorKind::kParse, "unsupported report version " + std::to_string(r.version));
    }
    r.local_origin = json_vec(j.at("local_origin"), "local_origin");
    r.transform = json_transform(j);
    const auto& stage = j.at("t_z_stage");
    r.t_z_stage.status = stage.at("status").get<std::string>();
    r.t_z_stage.t_z = stage.at("t_z").get<double>();
    r.t_z_stage.pairs = stage.at("pairs").get<std::size_t>();
    r.stage1 = json_transform(j.at("stage1"));
    const auto& solver = j.at("solver");
    r.solver.iterations = solver.at("iterations").get<int>();
    r.solver.pseudo_plane = solver.at("pseudo_plane").get<bool>();
    r.solver.variance_factor = json_num(solver.at("variance_factor"));
    r.solver.redundancy = solver.at("redundancy").get<long>();
    r.solver.raw_t_z = solver.at("raw_t_z").get<double>();
    for (const auto& jw : j.at("per_wall")) {
      WallDiagnostics w;
      w.id = jw.at("id").get<std::string>();
      w.status = jw.at("status").get<std::string>();
      w.neighbor_points = jw.at("neighbor_points").get<std::size_t>();
      w.subspace_points = jw.at("subspace_points").get<std::size_t>();
      w.segment_points = jw.at("segment_points").get<std::size_t>();
      w.cutoff_z_min = json_num(jw.at("cutoff_range")[0]);
      w.cutoff_z_max = json_num(jw.at("cutoff_range")[1]);
      w.rms_residual = json_num(jw.at("rms_residual"));
      r.per_wall.push_back(w);
    }
    const auto& m = j.at("metrics");
    if (!m.empty()) {
      MetricsSummary s;
      s.status = m.at("status").get<std::string>();
      s.err_h = json_num(m.at("err_h"));
      s.err_v = json_num(m.at("err_v"));
      s.std_h = json_num(m.at("std_h"));
      s.std_v = json_num(m.at("std_v"));
      s.n_h = m.at("n_h").get<std::size_t>();
      s.n_v = m.at("n_v").get<std::size_t>();
      r.metrics = s;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
  return r;
}

void write_report(const std::filesystem::path& path, const RegistrationReport& report) {
  write_text_file(path, report_to_json(report));
}

RegistrationReport read_report(const std::filesystem::path& path) {
  return report_from_json(read_text_file(path));
}

std::string transform_to_json(const RigidTransform& t) {
  ordered_json j;
  j["version"] = kReportVersion;
  const ordered_json body = transform_json(t);
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j.dump(2) + "\n";
}

RigidTransform transform_from_json(const std::string& text) {
  try {
    return json_transform(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path, std::ios::out | std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed", path.string());
}

}  // namespace l2mreg
