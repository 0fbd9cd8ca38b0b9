#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "crowdsynth/image.hpp"

namespace crowdsynth::io {

namespace fs = std::filesystem;

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

// Reads the next whitespace-delimited token of a PNM header, skipping comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace detail

inline GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  const std::string magic = detail::pnm_token(in);
  if (magic != "P5" && magic != "P2") throw ImageIoError(path.string() + ": not a PGM file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::pnm_token(in));
    h = std::stoi(detail::pnm_token(in));
    maxval = std::stoi(detail::pnm_token(in));
  } catch (const std::exception&) {
    throw ImageIoError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw ImageIoError(path.string() + ": unsupported PGM header (8-bit only)");
  }
  GrayImage img(w, h);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
      throw ImageIoError(path.string() + ": truncated PGM data");
    }
  } else {
    for (auto& p : img.data) {
      const std::string t = detail::pnm_token(in);
      if (t.empty()) throw ImageIoError(path.string() + ": truncated PGM data");
      p = static_cast<std::uint8_t>(std::stoi(t));
    }
  }
  if (maxval != 255) {
    for (auto& p : img.data) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
  }
  return img;
}

inline void write_pgm(const GrayImage& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

inline GrayImage read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ImageIoError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ImageIoError(path.string() + ": " + msg);
  }
  return img;
}

inline void write_png(const GrayImage& img, const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data.data(), 0, nullptr)) {
    throw ImageIoError(path.string() + ": " + image.message);
  }
}

inline void write_png(const RgbImage& img, const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data.data(), 0, nullptr)) {
    throw ImageIoError(path.string() + ": " + image.message);
  }
}

/// Loads a .png or .pgm file as 8-bit grayscale.
inline GrayImage read_image(const fs::path& path) {
  const std::string ext = detail::lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  throw ImageIoError(path.string() + ": unsupported image type");
}

/// Image files of a directory in lexicographic filename order.
inline std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ImageIoError("frame directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = detail::lower_ext(e.path());
    if (ext == ".png" || ext == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

inline FrameSequence read_frame_dir(const fs::path& dir, double fps) {
  FrameSequence seq;
  seq.fps = fps;
  for (const auto& f : list_frames(dir)) seq.frames.push_back(read_image(f));
  if (seq.frames.empty()) throw ImageIoError("no frames in " + dir.string());
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    if (seq.frames[i].width != seq.width() || seq.frames[i].height != seq.height()) {
      throw ImageIoError("frame size mismatch in " + dir.string());
    }
  }
  seq.validate();
  return seq;
}

inline std::string frame_name(std::size_t index, const std::string& ext = ".png") {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << ext;
  return os.str();
}

/// Writes frames as zero-padded PNGs; with `rgb` the gray values are replicated
/// into three channels. Returns the written paths in order.
inline std::vector<fs::path> write_frame_dir(const FrameSequence& seq, const fs::path& dir, bool rgb = false) {
  fs::create_directories(dir);
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const fs::path p = dir / frame_name(i);
    if (rgb) {
      write_png(to_rgb(seq.frames[i]), p);
    } else {
      write_png(seq.frames[i], p);
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace crowdsynth::io
