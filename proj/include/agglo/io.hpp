#pragma once

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "agglo/error.hpp"
#include "agglo/image.hpp"

namespace agglo {

namespace fs = std::filesystem;

// Writes via a sibling temp file and rename, so readers never observe a
// partially written file.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::io, "cannot open for writing", path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(ErrorKind::io, "write failed", path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::io, "rename failed: " + ec.message(), path.string());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot open for reading", path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace detail {

inline void png_write_to_string(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

inline void png_flush_noop(png_structp) {}

[[noreturn]] inline void png_fail(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

}  // namespace detail

// 8-bit grayscale PNG, fixed compression settings so output bytes depend
// only on the pixels.
inline std::string encode_png(const Gray8& image) {
  std::string out, err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_fail, nullptr);
  if (!png) throw Error(ErrorKind::io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "PNG encode failed: " + err);
  }
  png_set_write_fn(png, &out, detail::png_write_to_string, detail::png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y)
    png_write_row(png, const_cast<png_bytep>(image.row(y).data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline void write_png(const fs::path& path, const Gray8& image) {
  write_file_atomic(path, encode_png(image));
}

// Reads any PNG and converts it to 8-bit grayscale.
inline Gray8 read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw Error(ErrorKind::io, std::string("cannot read PNG: ") + img.message, path.string());
  img.format = PNG_FORMAT_GRAY;
  Gray8 out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.data().data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorKind::io, std::string("cannot decode PNG: ") + img.message, path.string());
  }
  return out;
}

}  // namespace agglo
