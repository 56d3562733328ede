#include "rawj.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace buqo {

namespace {

fs::path stem_of(const fs::path &path) {
  fs::path p = path;
  if (p.extension() == ".json" || p.extension() == ".raw")
    p.replace_extension();
  return p;
}

void write_payload(const fs::path &stem, std::span<const double> values, json header) {
  if (stem.has_parent_path())
    fs::create_directories(stem.parent_path());
  const fs::path raw = fs::path(stem).concat(".raw");
  header["dtype"] = "f64";
  header["order"] = "row-major";
  header["data"] = raw.filename().string();
  write_text(raw, encode_f64_le(values));
  write_text(fs::path(stem).concat(".json"), header.dump(2) + "\n");
}

json read_header(const fs::path &path) {
  const fs::path hp = rawj_header_path(path);
  json h;
  try {
    h = json::parse(read_text(hp));
  } catch (const json::parse_error &e) {
    throw IoError("malformed RAWJ header " + hp.string() + ": " + e.what());
  }
  if (h.value("dtype", "f64") != "f64")
    throw IoError("unsupported RAWJ dtype in " + hp.string());
  if (h.value("order", "row-major") != "row-major")
    throw IoError("unsupported RAWJ order in " + hp.string());
  return h;
}

Vec read_payload(const fs::path &path, const json &h, std::size_t expected) {
  const fs::path hp = rawj_header_path(path);
  fs::path raw = h.contains("data") ? hp.parent_path() / h["data"].get<std::string>()
                                    : fs::path(stem_of(hp)).concat(".raw");
  Vec v = decode_f64_le(read_text(raw));
  if (v.size() != expected)
    throw IoError("RAWJ payload " + raw.string() + " holds " + std::to_string(v.size()) +
                  " values, header says " + std::to_string(expected));
  return v;
}

std::size_t dim(const json &h, const char *key, const fs::path &path) {
  if (!h.contains(key) || !h[key].is_number_integer() || h[key].get<long long>() <= 0)
    throw IoError("RAWJ header " + path.string() + " lacks a positive \"" + key + "\"");
  return h[key].get<std::size_t>();
}

} // namespace

fs::path rawj_header_path(const fs::path &path) { return fs::path(stem_of(path)).concat(".json"); }

void write_rawj(const fs::path &path, const Image &img, const json &extra) {
  json h = extra.is_object() ? extra : json::object();
  h["height"] = img.height;
  h["width"] = img.width;
  write_payload(stem_of(path), img.values, h);
}

void write_rawj(const fs::path &path, const Sinogram &sino, const json &extra) {
  json h = extra.is_object() ? extra : json::object();
  h["angles"] = sino.angles;
  h["detectors"] = sino.detectors;
  write_payload(stem_of(path), sino.values, h);
}

Image read_rawj_image(const fs::path &path, json *header) {
  json h = read_header(path);
  const auto height = dim(h, "height", path);
  const auto width = dim(h, "width", path);
  Image img(height, width, read_payload(path, h, height * width));
  if (header)
    *header = std::move(h);
  return img;
}

Sinogram read_rawj_sinogram(const fs::path &path, json *header) {
  json h = read_header(path);
  const auto angles = dim(h, "angles", path);
  const auto detectors = dim(h, "detectors", path);
  Sinogram s(angles, detectors, read_payload(path, h, angles * detectors));
  if (header)
    *header = std::move(h);
  return s;
}

std::string encode_f64_le(std::span<const double> values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b)
      out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return out;
}

Vec decode_f64_le(std::string_view bytes) {
  if (bytes.size() % 8 != 0)
    throw IoError("float64 payload length " + std::to_string(bytes.size()) + " is not a multiple of 8");
  Vec out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

namespace {

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream &in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty())
        break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

} // namespace

Mask read_pgm_mask(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open mask " + path.string());
  if (pgm_token(in) != "P5")
    throw IoError("mask " + path.string() + " is not a binary PGM (P5)");
  std::size_t w = 0, h = 0;
  int maxval = 0;
  try {
    w = std::stoul(pgm_token(in));
    h = std::stoul(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception &) {
    throw IoError("malformed PGM header in " + path.string());
  }
  if (maxval <= 0 || maxval > 255)
    throw IoError("mask " + path.string() + " must be 8-bit");
  std::vector<std::uint8_t> bytes(w * h);
  in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw IoError("truncated PGM payload in " + path.string());
  return Mask(h, w, std::move(bytes));
}

void write_pgm_mask(const fs::path &path, const Mask &mask) {
  std::ostringstream os;
  os << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::string data = os.str();
  for (auto b : mask.membership)
    data.push_back(b ? static_cast<char>(255) : '\0');
  write_text(path, data);
}

void write_text(const fs::path &path, const std::string &text) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    throw IoError("short write to " + path.string());
}

std::string read_text(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace buqo
