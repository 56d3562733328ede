#pragma once

// RAWJ: a JSON header (`<stem>.json`) next to a raw little-endian float64 payload
// (`<stem>.raw`). Images carry {"height","width"}, sinograms {"angles","detectors"};
// both add {"dtype":"f64","order":"row-major","data":"<stem>.raw"}. Extra header keys
// are preserved as metadata.
//
// Masks are binary 8-bit PGM (P5); any nonzero byte is a member.

#include "grid.hpp"

#include <filesystem>
#include "json.hpp"

namespace buqo {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;
using json = nlohmann::json;

/// `path` may name the header, the payload or the bare stem.
fs::path rawj_header_path(const fs::path &path);

void write_rawj(const fs::path &path, const Image &img, const json &extra = json::object());
void write_rawj(const fs::path &path, const Sinogram &sino, const json &extra = json::object());

Image read_rawj_image(const fs::path &path, json *header = nullptr);
Sinogram read_rawj_sinogram(const fs::path &path, json *header = nullptr);

std::string encode_f64_le(std::span<const double> values);
Vec decode_f64_le(std::string_view bytes);

Mask read_pgm_mask(const fs::path &path);
void write_pgm_mask(const fs::path &path, const Mask &mask);

void write_text(const fs::path &path, const std::string &text);
std::string read_text(const fs::path &path);

} // namespace buqo
