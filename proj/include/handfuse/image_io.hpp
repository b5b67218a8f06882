#pragma once

// PNM (P2/P3/P5/P6) and PNG readers/writers. PNG support needs libpng at link time.

#include <png.h>

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "handfuse/image.hpp"

namespace handfuse::io {

namespace detail {

inline int read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int v = -1;
  if (!(in >> v)) fail(Errc::ParseError, "malformed PNM header");
  return v;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) fail(Errc::IoError, "cannot open " + path.string());
  return f;
}

}  // namespace detail

inline RgbImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    fail(Errc::ParseError, path.string() + ": unsupported PNM magic");
  const int w = detail::read_pnm_int(in);
  const int h = detail::read_pnm_int(in);
  const int maxval = detail::read_pnm_int(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) fail(Errc::ParseError, path.string() + ": bad PNM header");
  const bool color = magic == "P3" || magic == "P6";
  const bool ascii = magic == "P2" || magic == "P3";
  RgbImage img(w, h);
  auto scale = [maxval](int v) { return static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval); };
  if (ascii) {
    for (auto& px : img.pixels()) {
      if (color) {
        px.r = scale(detail::read_pnm_int(in));
        px.g = scale(detail::read_pnm_int(in));
        px.b = scale(detail::read_pnm_int(in));
      } else {
        px.r = px.g = px.b = scale(detail::read_pnm_int(in));
      }
    }
  } else {
    in.get();  // single whitespace after maxval
    const std::size_t channels = color ? 3 : 1;
    std::vector<unsigned char> raw(img.size() * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) fail(Errc::ParseError, path.string() + ": truncated");
    auto px = img.pixels();
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (color)
        px[i] = {scale(raw[3 * i]), scale(raw[3 * i + 1]), scale(raw[3 * i + 2])};
      else
        px[i].r = px[i].g = px[i].b = scale(raw[i]);
    }
  }
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.size()));
}

inline void write_pgm(const std::filesystem::path& path, const BinaryImage& mask) {
  GrayImage g(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) g.pixels()[i] = mask.pixels()[i] ? 255 : 0;
  write_pgm(path, g);
}

inline void write_pgm(const std::filesystem::path& path, const FloatImage& img) {
  GrayImage g(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i)
    g.pixels()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels()[i], 0.0f, 1.0f) * 255.0f));
  write_pgm(path, g);
}

inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.size() * 3));
}

inline RgbImage read_png(const std::filesystem::path& path) {
  auto file = detail::open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::ParseError, path.string() + ": invalid PNG");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_expand(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::ParseError, path.string() + ": unexpected PNG layout");
  }
  RgbImage img(w, h);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<std::size_t>(y)] = reinterpret_cast<png_bytep>(&img(0, y));
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
  auto file = detail::open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::IoError, "cannot write " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) png_write_row(png, const_cast<png_bytep>(&img(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Dispatches on the file signature: PNG or any PNM flavour.
inline RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  in.close();
  if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (sig[0] == 'P') return read_pnm(path);
  fail(Errc::ParseError, path.string() + ": unrecognised image format");
}

}  // namespace handfuse::io
