#pragma once

// PLY (ascii / binary_little_endian) and vertex-colored OBJ reading and writing.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "model.hpp"

namespace nss3dqa {

enum class PlyEncoding { ascii, binary_le };

namespace detail::ply {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<Scalar> scalar_from_name(std::string_view n) {
  if (n == "char" || n == "int8") return Scalar::i8;
  if (n == "uchar" || n == "uint8") return Scalar::u8;
  if (n == "short" || n == "int16") return Scalar::i16;
  if (n == "ushort" || n == "uint16") return Scalar::u16;
  if (n == "int" || n == "int32") return Scalar::i32;
  if (n == "uint" || n == "uint32") return Scalar::u32;
  if (n == "float" || n == "float32") return Scalar::f32;
  if (n == "double" || n == "float64") return Scalar::f64;
  return std::nullopt;
}

inline std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::i8:
    case Scalar::u8: return 1;
    case Scalar::i16:
    case Scalar::u16: return 2;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32: return 4;
    case Scalar::f64: return 8;
  }
  return 0;
}

inline bool is_integral(Scalar s) { return s != Scalar::f32 && s != Scalar::f64; }

struct Property {
  std::string name;
  Scalar type = Scalar::f32;
  bool is_list = false;
  Scalar count_type = Scalar::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

struct Header {
  PlyEncoding encoding = PlyEncoding::ascii;
  std::vector<Element> elements;
  std::size_t body_offset = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_count(std::string_view tok, std::size_t& out) {
  const auto* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc{} && p == end;
}

inline Header parse_header(std::string_view bytes) {
  Header h;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= bytes.size()) return false;
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) return false;
    line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || split_ws(line) != std::vector<std::string_view>{"ply"})
    throw ParseError(ParseErrc::malformed_header, "missing 'ply' magic line");
  bool have_format = false;
  while (true) {
    if (!next_line(line)) throw ParseError(ParseErrc::malformed_header, "missing end_header");
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const auto& kw = tok[0];
    if (kw == "end_header") break;
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      if (tok.size() != 3) throw ParseError(ParseErrc::malformed_header, "bad format line");
      if (tok[2] != "1.0") throw ParseError(ParseErrc::unsupported_format, "version " + std::string(tok[2]));
      if (tok[1] == "ascii") h.encoding = PlyEncoding::ascii;
      else if (tok[1] == "binary_little_endian") h.encoding = PlyEncoding::binary_le;
      else throw ParseError(ParseErrc::unsupported_format, std::string(tok[1]));
      have_format = true;
    } else if (kw == "element") {
      Element e;
      if (tok.size() != 3 || !parse_count(tok[2], e.count))
        throw ParseError(ParseErrc::malformed_header, "bad element line '" + std::string(line) + "'");
      e.name = tok[1];
      h.elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (h.elements.empty()) throw ParseError(ParseErrc::malformed_header, "property before any element");
      Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = scalar_from_name(tok[2]);
        auto it = scalar_from_name(tok[3]);
        if (!ct || !it || !is_integral(*ct))
          throw ParseError(ParseErrc::malformed_header, "bad list property '" + std::string(line) + "'");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
        p.name = tok[4];
      } else if (tok.size() == 3) {
        auto t = scalar_from_name(tok[1]);
        if (!t) throw ParseError(ParseErrc::malformed_header, "unknown property type '" + std::string(tok[1]) + "'");
        p.type = *t;
        p.name = tok[2];
      } else {
        throw ParseError(ParseErrc::malformed_header, "bad property line '" + std::string(line) + "'");
      }
      h.elements.back().props.push_back(std::move(p));
    } else {
      throw ParseError(ParseErrc::malformed_header, "unknown keyword '" + std::string(kw) + "'");
    }
  }
  if (!have_format) throw ParseError(ParseErrc::malformed_header, "missing format line");
  h.body_offset = pos;
  return h;
}

/// Sequential reader over the body; yields every value as a double.
class BodyReader {
 public:
  BodyReader(std::string_view body, PlyEncoding enc) : body_(body), enc_(enc) {}

  double read(Scalar t) { return enc_ == PlyEncoding::ascii ? read_ascii(t) : read_binary(t); }

 private:
  std::string_view next_token() {
    while (pos_ < body_.size() && is_space(body_[pos_])) ++pos_;
    if (pos_ >= body_.size()) throw ParseError(ParseErrc::truncated_body, "unexpected end of ascii body");
    std::size_t j = pos_;
    while (j < body_.size() && !is_space(body_[j])) ++j;
    auto tok = body_.substr(pos_, j - pos_);
    pos_ = j;
    return tok;
  }
  static bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

  double read_ascii(Scalar t) {
    const auto tok = next_token();
    const char* b = tok.data();
    const char* e = b + tok.size();
    std::from_chars_result r{};
    double out = 0;
    if (t == Scalar::f32) {
      // Parse at float precision so ascii and binary bodies agree bit-for-bit.
      float f = 0;
      r = std::from_chars(b, e, f);
      out = f;
    } else if (t == Scalar::f64) {
      r = std::from_chars(b, e, out);
    } else {
      std::int64_t v = 0;
      r = std::from_chars(b, e, v);
      out = static_cast<double>(v);
    }
    if (r.ec != std::errc{} || r.ptr != e)
      throw ParseError(ParseErrc::invalid_value, "cannot parse '" + std::string(tok) + "'");
    return out;
  }

  double read_binary(Scalar t) {
    const auto n = scalar_size(t);
    if (body_.size() - pos_ < n) throw ParseError(ParseErrc::truncated_body, "unexpected end of binary body");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(body_[pos_ + i])) << (8 * i);
    pos_ += n;
    switch (t) {
      case Scalar::i8: return static_cast<std::int8_t>(bits);
      case Scalar::u8: return static_cast<std::uint8_t>(bits);
      case Scalar::i16: return static_cast<std::int16_t>(bits);
      case Scalar::u16: return static_cast<std::uint16_t>(bits);
      case Scalar::i32: return static_cast<std::int32_t>(bits);
      case Scalar::u32: return static_cast<std::uint32_t>(bits);
      case Scalar::f32: return std::bit_cast<float>(static_cast<std::uint32_t>(bits));
      case Scalar::f64: return std::bit_cast<double>(bits);
    }
    return 0;
  }

  std::string_view body_;
  PlyEncoding enc_;
  std::size_t pos_ = 0;
};

inline std::uint8_t to_channel(double v, std::size_t vertex) {
  if (!(v >= 0 && v <= 255) || v != std::floor(v))
    throw ParseError(ParseErrc::invalid_value,
                     "vertex " + std::to_string(vertex) + " has color channel outside 0..255");
  return static_cast<std::uint8_t>(v);
}

}  // namespace detail::ply

/// Parses a PLY byte stream. Returns a mesh when a face element with at least
/// one face is present, otherwise a point cloud.
inline ModelHandle parse_ply(std::string_view bytes) {
  using namespace detail::ply;
  const Header h = parse_header(bytes);

  const Element* vertex_el = nullptr;
  const Element* face_el = nullptr;
  for (const auto& e : h.elements) {
    if (e.name == "vertex" && !vertex_el) vertex_el = &e;
    if (e.name == "face" && !face_el) face_el = &e;
  }
  if (!vertex_el) throw ParseError(ParseErrc::missing_property, "no vertex element");

  // Slot indices inside the vertex element.
  int px = -1, py = -1, pz = -1, pr = -1, pg = -1, pb = -1;
  for (std::size_t i = 0; i < vertex_el->props.size(); ++i) {
    const auto& p = vertex_el->props[i];
    if (p.is_list) continue;
    int* slot = nullptr;
    if (p.name == "x") slot = &px;
    else if (p.name == "y") slot = &py;
    else if (p.name == "z") slot = &pz;
    else if (p.name == "red") slot = &pr;
    else if (p.name == "green") slot = &pg;
    else if (p.name == "blue") slot = &pb;
    if (slot) *slot = static_cast<int>(i);
  }
  if (px < 0 || py < 0 || pz < 0) throw ParseError(ParseErrc::missing_property, "vertex element lacks x/y/z");
  if (pr < 0 || pg < 0 || pb < 0)
    throw ParseError(ParseErrc::missing_property, "vertex element lacks red/green/blue");
  for (int c : {pr, pg, pb})
    if (!is_integral(vertex_el->props[c].type))
      throw ParseError(ParseErrc::missing_property, "color property '" + vertex_el->props[c].name +
                                                        "' must be an integer type");

  int face_list = -1;
  if (face_el) {
    for (std::size_t i = 0; i < face_el->props.size(); ++i) {
      const auto& p = face_el->props[i];
      if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) face_list = static_cast<int>(i);
    }
    if (face_list < 0 && face_el->count > 0)
      throw ParseError(ParseErrc::missing_property, "face element lacks a vertex_indices list");
    if (face_list >= 0 && !is_integral(face_el->props[face_list].type))
      throw ParseError(ParseErrc::malformed_header, "face indices must be an integer type");
  }

  BodyReader in(bytes.substr(h.body_offset), h.encoding);
  std::vector<Vec3> positions;
  std::vector<Rgb> colors;
  std::vector<Face> faces;
  std::vector<double> row;

  for (const auto& e : h.elements) {
    const bool is_vertex = &e == vertex_el;
    const bool is_face = &e == face_el;
    if (is_vertex) {
      positions.reserve(std::min<std::size_t>(e.count, bytes.size()));
      colors.reserve(std::min<std::size_t>(e.count, bytes.size()));
    }
    if (e.props.empty()) continue;
    for (std::size_t n = 0; n < e.count; ++n) {
      row.assign(e.props.size(), 0.0);
      for (std::size_t pi = 0; pi < e.props.size(); ++pi) {
        const auto& p = e.props[pi];
        if (!p.is_list) {
          row[pi] = in.read(p.type);
          continue;
        }
        const double cnt = in.read(p.count_type);
        if (cnt < 0) throw ParseError(ParseErrc::invalid_value, "negative list length");
        const auto len = static_cast<std::size_t>(cnt);
        if (is_face && static_cast<int>(pi) == face_list) {
          if (len != 3)
            throw ParseError(ParseErrc::non_triangle_face,
                             "face " + std::to_string(n) + " has " + std::to_string(len) + " vertices");
          Face f{};
          for (std::size_t k = 0; k < 3; ++k) {
            const double idx = in.read(p.type);
            if (idx < 0 || idx > static_cast<double>(UINT32_MAX))
              throw ParseError(ParseErrc::index_out_of_range, "face " + std::to_string(n) + " index " +
                                                                  std::to_string(static_cast<long long>(idx)));
            f[k] = static_cast<std::uint32_t>(idx);
          }
          faces.push_back(f);
        } else {
          for (std::size_t k = 0; k < len; ++k) in.read(p.type);
        }
      }
      if (is_vertex) {
        Vec3 v{row[px], row[py], row[pz]};
        if (!is_finite(v))
          throw ParseError(ParseErrc::invalid_value, "vertex " + std::to_string(n) + " has a non-finite coordinate");
        positions.push_back(v);
        colors.push_back({to_channel(row[pr], n), to_channel(row[pg], n), to_channel(row[pb], n)});
      }
    }
  }

  if (positions.empty()) throw ParseError(ParseErrc::invalid_value, "model has no vertices");
  if (faces.empty()) return ColoredPointCloud{std::move(positions), std::move(colors)};

  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (auto i : faces[f])
      if (i >= positions.size())
        throw ParseError(ParseErrc::index_out_of_range, "face " + std::to_string(f) + " references vertex " +
                                                            std::to_string(i) + " of " +
                                                            std::to_string(positions.size()));
    const auto& t = faces[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw ParseError(ParseErrc::invalid_value, "face " + std::to_string(f) + " repeats a vertex index");
  }
  return ColoredMesh{std::move(positions), std::move(colors), std::move(faces)};
}

/// Parses an OBJ with per-vertex colors on "v x y z r g b" lines (channels in [0,1]).
inline ColoredMesh parse_obj(std::string_view text) {
  using detail::ply::split_ws;
  ColoredMesh mesh;
  std::size_t colored = 0, uncolored = 0;
  std::vector<std::array<long long, 3>> raw_faces;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto parse_double = [&](std::string_view tok) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v))
      throw ParseError(ParseErrc::invalid_value,
                       "line " + std::to_string(line_no) + ": cannot parse '" + std::string(tok) + "'");
    return v;
  };

  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;

    if (tok[0] == "v") {
      if (tok.size() != 4 && tok.size() != 7)
        throw ParseError(ParseErrc::invalid_value,
                         "line " + std::to_string(line_no) + ": vertex needs 3 coordinates or 3 coordinates + rgb");
      mesh.vertices.push_back({parse_double(tok[1]), parse_double(tok[2]), parse_double(tok[3])});
      if (tok.size() == 7) {
        Rgb c{};
        for (int k = 0; k < 3; ++k) {
          const double v = parse_double(tok[4 + k]);
          if (v < 0 || v > 1)
            throw ParseError(ParseErrc::invalid_value,
                             "line " + std::to_string(line_no) + ": color channel outside [0,1]");
          c[k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
        mesh.vertex_colors.push_back(c);
        ++colored;
      } else {
        mesh.vertex_colors.push_back({255, 255, 255});
        ++uncolored;
      }
    } else if (tok[0] == "f") {
      if (tok.size() != 4)
        throw ParseError(ParseErrc::non_triangle_face,
                         "line " + std::to_string(line_no) + ": face has " + std::to_string(tok.size() - 1) +
                             " vertices");
      std::array<long long, 3> f{};
      for (int k = 0; k < 3; ++k) {
        auto t = tok[1 + k];
        t = t.substr(0, t.find('/'));
        long long idx = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
        if (ec != std::errc{} || p != t.data() + t.size() || idx == 0)
          throw ParseError(ParseErrc::invalid_value,
                           "line " + std::to_string(line_no) + ": bad face index '" + std::string(tok[1 + k]) + "'");
        // Negative indices are relative to the vertices read so far.
        f[k] = idx > 0 ? idx - 1 : static_cast<long long>(mesh.vertices.size()) + idx;
      }
      raw_faces.push_back(f);
    }
    // vt, vn, o, g, s, usemtl, mtllib, ... are ignored.
  }

  if (colored > 0 && uncolored > 0)
    throw ParseError(ParseErrc::mixed_colors, std::to_string(uncolored) + " of " +
                                                  std::to_string(mesh.vertices.size()) + " vertices lack a color");
  if (mesh.vertices.empty()) throw ParseError(ParseErrc::invalid_value, "no vertices");

  const auto nv = static_cast<long long>(mesh.vertices.size());
  mesh.faces.reserve(raw_faces.size());
  for (std::size_t i = 0; i < raw_faces.size(); ++i) {
    Face f{};
    for (int k = 0; k < 3; ++k) {
      const auto idx = raw_faces[i][k];
      if (idx < 0 || idx >= nv)
        throw ParseError(ParseErrc::index_out_of_range, "face " + std::to_string(i) + " index " +
                                                            std::to_string(idx + 1) + " with " +
                                                            std::to_string(nv) + " vertices");
      f[k] = static_cast<std::uint32_t>(idx);
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw ParseError(ParseErrc::invalid_value, "face " + std::to_string(i) + " repeats a vertex index");
    mesh.faces.push_back(f);
  }
  return mesh;
}

namespace detail::ply {

inline void put_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_float_ascii(std::string& out, float f) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, f);
  out.append(buf, p);
}

}  // namespace detail::ply

/// Serializes a model as PLY. Coordinates are written as 32-bit floats.
inline std::string write_ply(const ModelHandle& model, PlyEncoding enc) {
  using namespace detail::ply;
  validate(model);
  const auto& pos = positions_of(model);
  const auto& col = colors_of(model);
  const auto* mesh = std::get_if<ColoredMesh>(&model);
  if (mesh && mesh->faces.empty()) throw Error("mesh has no faces; write it as a point cloud");

  std::string out;
  out += "ply\nformat ";
  out += enc == PlyEncoding::ascii ? "ascii" : "binary_little_endian";
  out += " 1.0\nelement vertex " + std::to_string(pos.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (mesh) out += "element face " + std::to_string(mesh->faces.size()) + "\nproperty list uchar int vertex_indices\n";
  out += "end_header\n";

  for (std::size_t i = 0; i < pos.size(); ++i) {
    const float xyz[3] = {static_cast<float>(pos[i].x), static_cast<float>(pos[i].y), static_cast<float>(pos[i].z)};
    if (enc == PlyEncoding::ascii) {
      for (float f : xyz) {
        put_float_ascii(out, f);
        out.push_back(' ');
      }
      out += std::to_string(col[i][0]) + ' ' + std::to_string(col[i][1]) + ' ' + std::to_string(col[i][2]) + '\n';
    } else {
      for (float f : xyz) put_le32(out, std::bit_cast<std::uint32_t>(f));
      for (auto c : col[i]) out.push_back(static_cast<char>(c));
    }
  }
  if (mesh) {
    for (const auto& f : mesh->faces) {
      if (enc == PlyEncoding::ascii) {
        out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
      } else {
        out.push_back(3);
        for (auto i : f) put_le32(out, i);
      }
    }
  }
  return out;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

/// Loads a model by extension (.ply or .obj, case-insensitive).
inline ModelHandle read_model(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext != ".ply" && ext != ".obj") throw Error("'" + path.string() + "': unsupported extension '" + ext + "'");
  const auto bytes = read_file_bytes(path);
  try {
    if (ext == ".ply") return parse_ply(bytes);
    return parse_obj(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.code(), path.string() + ": " + e.detail());
  }
}

inline void write_model(const ModelHandle& model, const std::filesystem::path& path, PlyEncoding enc) {
  const auto bytes = write_ply(model, enc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace nss3dqa
