#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string_view>

#include "bitalloc/cloud.hpp"
#include "bitalloc/error.hpp"

namespace bitalloc {
namespace {

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<ScalarType> parse_scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::kInt8;
  if (name == "uchar" || name == "uint8") return ScalarType::kUInt8;
  if (name == "short" || name == "int16") return ScalarType::kInt16;
  if (name == "ushort" || name == "uint16") return ScalarType::kUInt16;
  if (name == "int" || name == "int32") return ScalarType::kInt32;
  if (name == "uint" || name == "uint32") return ScalarType::kUInt32;
  if (name == "float" || name == "float32") return ScalarType::kFloat32;
  if (name == "double" || name == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8:
      return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16:
      return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32:
      return 4;
    case ScalarType::kFloat64:
      return 8;
  }
  return 0;
}

bool is_integral(ScalarType t) { return t != ScalarType::kFloat32 && t != ScalarType::kFloat64; }

struct Property {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  PlyFormat format = PlyFormat::kAscii;
  int bit_depth = 0;
  std::vector<Element> elements;
};

[[noreturn]] void header_error(const std::string& what) {
  throw Error(ErrorCode::kMalformedHeader, "PLY header: " + what);
}

std::vector<std::string> split_words(const std::string& line) {
  std::istringstream in(line);
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

Header parse_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) header_error("missing 'ply' magic");

  Header header;
  bool have_format = false;
  while (true) {
    if (!std::getline(in, line)) header_error("missing end_header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> words = split_words(line);
    if (words.empty()) continue;
    const std::string& key = words[0];
    if (key == "end_header") break;
    if (key == "format") {
      if (words.size() != 3 || words[2] != "1.0") header_error("bad format line '" + line + "'");
      if (words[1] == "ascii") {
        header.format = PlyFormat::kAscii;
      } else if (words[1] == "binary_little_endian") {
        header.format = PlyFormat::kBinaryLittleEndian;
      } else {
        header_error("unsupported format '" + words[1] + "'");
      }
      have_format = true;
    } else if (key == "comment") {
      if (words.size() == 3 && words[1] == "bit_depth") {
        int depth = 0;
        auto [ptr, ec] = std::from_chars(words[2].data(), words[2].data() + words[2].size(), depth);
        if (ec != std::errc() || ptr != words[2].data() + words[2].size() || depth < 1 || depth > 30) {
          header_error("bad bit_depth comment '" + line + "'");
        }
        header.bit_depth = depth;
      }
    } else if (key == "obj_info") {
      continue;
    } else if (key == "element") {
      if (words.size() != 3) header_error("bad element line '" + line + "'");
      Element element;
      element.name = words[1];
      auto [ptr, ec] = std::from_chars(words[2].data(), words[2].data() + words[2].size(), element.count);
      if (ec != std::errc() || ptr != words[2].data() + words[2].size()) {
        header_error("bad element count '" + words[2] + "'");
      }
      header.elements.push_back(std::move(element));
    } else if (key == "property") {
      if (header.elements.empty()) header_error("property before any element");
      Property prop;
      if (words.size() == 5 && words[1] == "list") {
        prop.is_list = true;
        prop.name = words[4];
      } else if (words.size() == 3) {
        auto type = parse_scalar_type(words[1]);
        if (!type) header_error("unknown property type '" + words[1] + "'");
        prop.type = *type;
        prop.name = words[2];
      } else {
        header_error("bad property line '" + line + "'");
      }
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      header_error("unknown keyword '" + key + "'");
    }
  }
  if (!have_format) header_error("missing format line");
  return header;
}

struct VertexLayout {
  std::size_t index_of[6];  // x y z red green blue
  std::size_t stride = 0;   // bytes, binary only
  std::vector<std::size_t> offsets;
};

constexpr const char* kRequired[6] = {"x", "y", "z", "red", "green", "blue"};

VertexLayout vertex_layout(const Element& vertex, std::vector<std::string>* warnings) {
  VertexLayout layout;
  for (std::size_t k = 0; k < 6; ++k) layout.index_of[k] = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < vertex.properties.size(); ++i) {
    const Property& prop = vertex.properties[i];
    if (prop.is_list) {
      throw Error(ErrorCode::kMalformedHeader, "list property '" + prop.name + "' on vertex element");
    }
    layout.offsets.push_back(layout.stride);
    layout.stride += scalar_size(prop.type);
    bool known = false;
    for (std::size_t k = 0; k < 6; ++k) {
      if (prop.name == kRequired[k]) {
        layout.index_of[k] = i;
        known = true;
      }
    }
    if (!known && warnings) warnings->push_back("skipping unknown vertex property '" + prop.name + "'");
  }
  for (std::size_t k = 0; k < 6; ++k) {
    if (layout.index_of[k] == std::numeric_limits<std::size_t>::max()) {
      throw Error(ErrorCode::kMissingProperty,
                  std::string("vertex element lacks property '") + kRequired[k] + "'");
    }
  }
  for (std::size_t k = 3; k < 6; ++k) {
    if (!is_integral(vertex.properties[layout.index_of[k]].type)) {
      throw Error(ErrorCode::kMalformedHeader,
                  std::string("color property '") + kRequired[k] + "' must be an integer type");
    }
  }
  return layout;
}

template <typename T>
T read_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return std::bit_cast<T>(bits);
}

double decode_binary(ScalarType type, const unsigned char* p) {
  switch (type) {
    case ScalarType::kInt8: return read_le<std::int8_t>(p);
    case ScalarType::kUInt8: return read_le<std::uint8_t>(p);
    case ScalarType::kInt16: return read_le<std::int16_t>(p);
    case ScalarType::kUInt16: return read_le<std::uint16_t>(p);
    case ScalarType::kInt32: return read_le<std::int32_t>(p);
    case ScalarType::kUInt32: return read_le<std::uint32_t>(p);
    case ScalarType::kFloat32: return read_le<float>(p);
    case ScalarType::kFloat64: return read_le<double>(p);
  }
  return 0.0;
}

std::int32_t to_coordinate(double v, std::size_t point) {
  const double rounded = std::nearbyint(v);  // default rounding mode: ties to even
  if (!std::isfinite(rounded) || rounded < 0.0 || rounded > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
    throw Error(ErrorCode::kCoordinateOutOfRange,
                "point " + std::to_string(point) + " has coordinate " + std::to_string(v));
  }
  return static_cast<std::int32_t>(rounded);
}

std::uint8_t to_channel(double v, std::size_t point) {
  if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
    throw Error(ErrorCode::kInvalidCloud,
                "point " + std::to_string(point) + " has color channel " + std::to_string(v) + " outside [0,255]");
  }
  return static_cast<std::uint8_t>(v);
}

void append_point(const double values[6], std::size_t point, std::vector<Point3>& positions,
                  std::vector<Rgb>& colors) {
  positions.push_back({to_coordinate(values[0], point), to_coordinate(values[1], point),
                       to_coordinate(values[2], point)});
  colors.push_back({to_channel(values[3], point), to_channel(values[4], point), to_channel(values[5], point)});
}

class AsciiTokens {
 public:
  explicit AsciiTokens(std::string body) : body_(std::move(body)) {}

  bool next_line(std::vector<std::string_view>& tokens) {
    tokens.clear();
    while (pos_ < body_.size()) {
      std::size_t end = body_.find('\n', pos_);
      if (end == std::string::npos) end = body_.size();
      std::string_view line(body_.data() + pos_, end - pos_);
      pos_ = end + 1;
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) tokens.push_back(line.substr(i, j - i));
        i = j;
      }
      if (!tokens.empty()) return true;
    }
    return false;
  }

 private:
  std::string body_;
  std::size_t pos_ = 0;
};

double parse_number(std::string_view token, std::size_t point) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::kTruncatedBody,
                "vertex " + std::to_string(point) + ": bad numeric token '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace

PointCloud load_ply(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");

  const Header header = parse_header(in);
  std::size_t vertex_pos = header.elements.size();
  for (std::size_t i = 0; i < header.elements.size(); ++i) {
    if (header.elements[i].name == "vertex") {
      vertex_pos = i;
      break;
    }
  }
  if (vertex_pos == header.elements.size()) {
    throw Error(ErrorCode::kMalformedHeader, "PLY header: no vertex element");
  }
  const Element& vertex = header.elements[vertex_pos];
  const VertexLayout layout = vertex_layout(vertex, warnings);

  std::string body{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<Point3> positions;
  std::vector<Rgb> colors;
  positions.reserve(vertex.count);
  colors.reserve(vertex.count);

  if (header.format == PlyFormat::kAscii) {
    AsciiTokens tokens(std::move(body));
    std::vector<std::string_view> line;
    for (std::size_t e = 0; e < vertex_pos; ++e) {
      for (std::size_t i = 0; i < header.elements[e].count; ++i) {
        if (!tokens.next_line(line)) throw Error(ErrorCode::kTruncatedBody, "body ends inside element '" + header.elements[e].name + "'");
      }
    }
    double values[6];
    for (std::size_t i = 0; i < vertex.count; ++i) {
      if (!tokens.next_line(line)) {
        throw Error(ErrorCode::kTruncatedBody, "body ends after " + std::to_string(i) + " of " +
                                                   std::to_string(vertex.count) + " vertices");
      }
      if (line.size() < vertex.properties.size()) {
        throw Error(ErrorCode::kTruncatedBody, "vertex " + std::to_string(i) + " has too few values");
      }
      for (std::size_t k = 0; k < 6; ++k) values[k] = parse_number(line[layout.index_of[k]], i);
      append_point(values, i, positions, colors);
    }
  } else {
    std::size_t offset = 0;
    for (std::size_t e = 0; e < vertex_pos; ++e) {
      std::size_t stride = 0;
      for (const Property& p : header.elements[e].properties) {
        if (p.is_list) {
          throw Error(ErrorCode::kMalformedHeader,
                      "binary element '" + header.elements[e].name + "' with list property precedes vertex");
        }
        stride += scalar_size(p.type);
      }
      offset += stride * header.elements[e].count;
    }
    const std::size_t needed = offset + layout.stride * vertex.count;
    if (body.size() < needed) {
      throw Error(ErrorCode::kTruncatedBody, "binary body holds " + std::to_string(body.size()) +
                                                 " bytes, vertex data needs " + std::to_string(needed));
    }
    const auto* base = reinterpret_cast<const unsigned char*>(body.data()) + offset;
    double values[6];
    for (std::size_t i = 0; i < vertex.count; ++i) {
      const unsigned char* record = base + i * layout.stride;
      for (std::size_t k = 0; k < 6; ++k) {
        const std::size_t prop = layout.index_of[k];
        values[k] = decode_binary(vertex.properties[prop].type, record + layout.offsets[prop]);
      }
      append_point(values, i, positions, colors);
    }
  }

  return PointCloud(std::move(positions), std::move(colors), header.bit_depth);
}

void save_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");

  out << "ply\n"
      << (format == PlyFormat::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "comment bit_depth " << cloud.bit_depth() << "\n"
      << "element vertex " << cloud.size() << "\n"
      << "property int x\nproperty int y\nproperty int z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";

  const auto& pos = cloud.positions();
  const auto& col = cloud.colors();
  if (format == PlyFormat::kAscii) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      out << pos[i].x << ' ' << pos[i].y << ' ' << pos[i].z << ' ' << int{col[i].r} << ' '
          << int{col[i].g} << ' ' << int{col[i].b} << '\n';
    }
  } else {
    std::string buffer;
    buffer.reserve(cloud.size() * 15);
    auto put32 = [&buffer](std::int32_t v) {
      const auto bits = static_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) buffer.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      put32(pos[i].x);
      put32(pos[i].y);
      put32(pos[i].z);
      buffer.push_back(static_cast<char>(col[i].r));
      buffer.push_back(static_cast<char>(col[i].g));
      buffer.push_back(static_cast<char>(col[i].b));
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  }
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

}  // namespace bitalloc
