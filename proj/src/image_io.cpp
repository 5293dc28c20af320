#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "fglr/error.hpp"
#include "fglr/imgcore.hpp"

namespace fglr {

namespace {

namespace fs = std::filesystem;

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::uint16_t quantize16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

// ---- PNG --------------------------------------------------------------------

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

Raster read_png(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("'" + path.string() + "' is not a PNG file");

  std::string err;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  Raster out;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  int bit_depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode '" + path.string() + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (out.channels != 1 && out.channels != 3)
    throw IoError("unsupported PNG channel count in '" + path.string() + "'");
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i)
      out.samples[i] = ((buffer[2 * i] << 8) | buffer[2 * i + 1]) / 65535.0;
  } else if (bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i] / 255.0;
  } else {
    throw IoError("unsupported PNG bit depth in '" + path.string() + "'");
  }
  return out;
}

void write_png(const Raster& r, const fs::path& path, int bit_depth) {
  FilePtr file = open_file(path, "wb");
  std::string err;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = static_cast<std::size_t>(r.width) * r.channels * bytes_per_sample;
  std::vector<png_byte> buffer(row_bytes * static_cast<std::size_t>(r.height));
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    if (bit_depth == 16) {
      const std::uint16_t q = quantize16(r.samples[i]);
      buffer[2 * i] = static_cast<png_byte>(q >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    } else {
      buffer[i] = quantize8(r.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y) rows[y] = buffer.data() + row_bytes * y;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode '" + path.string() + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width),
               static_cast<png_uint_32>(r.height), bit_depth,
               r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("write failed for '" + path.string() + "'");
}

// ---- PNM --------------------------------------------------------------------

int read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int v = -1;
  if (!(in >> v)) throw IoError("malformed PNM header");
  return v;
}

Raster read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[2] = {};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw IoError("'" + path.string() + "' is not a binary PGM/PPM file");
  Raster out;
  out.channels = magic[1] == '5' ? 1 : 3;
  out.width = read_pnm_int(in);
  out.height = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (out.width <= 0 || out.height <= 0 || maxval <= 0 || maxval > 65535)
    throw IoError("invalid PNM header in '" + path.string() + "'");
  in.get();  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> bytes(n * bps);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("truncated PNM raster in '" + path.string() + "'");
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = bps == 2 ? (bytes[2 * i] << 8) | bytes[2 * i + 1] : bytes[i];
    out.samples[i] = static_cast<double>(v) / maxval;
  }
  return out;
}

void write_pnm(const Raster& r, const fs::path& path, int bit_depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const int maxval = bit_depth == 16 ? 65535 : 255;
  out << (r.channels == 1 ? "P5" : "P6") << '\n'
      << r.width << ' ' << r.height << '\n'
      << maxval << '\n';
  std::vector<unsigned char> bytes;
  bytes.reserve(r.samples.size() * (bit_depth == 16 ? 2 : 1));
  for (double v : r.samples) {
    if (bit_depth == 16) {
      const std::uint16_t q = quantize16(v);
      bytes.push_back(static_cast<unsigned char>(q >> 8));
      bytes.push_back(static_cast<unsigned char>(q & 0xff));
    } else {
      bytes.push_back(quantize8(v));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---- raw float dump ---------------------------------------------------------

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little,
                "raw dump writer assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated raw dump");
  return v;
}

Raster read_raw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "FGLR", 4) != 0)
    throw IoError("'" + path.string() + "' is not an FGLR raw dump");
  Raster out;
  out.width = static_cast<int>(get_le<std::uint32_t>(in));
  out.height = static_cast<int>(get_le<std::uint32_t>(in));
  out.channels = static_cast<int>(get_le<std::uint32_t>(in));
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = get_le<float>(in);
  return out;
}

void write_raw(const Raster& r, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write("FGLR", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.width));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.height));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.channels));
  for (double v : r.samples) put_le<float>(out, static_cast<float>(v));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void check_raster(const Raster& r) {
  if (r.width <= 0 || r.height <= 0 || (r.channels != 1 && r.channels != 3))
    throw DimensionError("raster must be non-empty with 1 or 3 channels");
  if (r.samples.size() != static_cast<std::size_t>(r.width) * r.height * r.channels)
    throw DimensionError("raster sample count does not match its dimensions");
}

}  // namespace

Raster read_raster(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: '" + path.string() + "'");
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  if (ext == ".fglr") return read_raw(path);
  throw IoError("unsupported image format '" + ext + "'");
}

void write_raster(const Raster& raster, const fs::path& path, int bit_depth) {
  check_raster(raster);
  if (bit_depth != 8 && bit_depth != 16) throw IoError("bit depth must be 8 or 16");
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(raster, path, bit_depth);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    if ((ext == ".pgm") != (raster.channels == 1))
      throw IoError("extension '" + ext + "' does not match channel count");
    return write_pnm(raster, path, bit_depth);
  }
  if (ext == ".fglr") return write_raw(raster, path);
  throw IoError("unsupported image format '" + ext + "'");
}

PlanarImage read_image(const fs::path& path) {
  const Raster r = read_raster(path);
  PlanarImage img(r.width, r.height);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * r.width + x) * r.channels;
      for (Channel c : kChannels)
        img.at(c, x, y) = r.samples[base + (r.channels == 1 ? 0 : static_cast<int>(c))];
    }
  return img;
}

void write_image(const PlanarImage& img, const fs::path& path, int bit_depth) {
  Raster r{img.width(), img.height(), 3, {}};
  r.samples.resize(img.pixel_count() * 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (Channel c : kChannels)
        r.samples[(static_cast<std::size_t>(y) * img.width() + x) * 3 + static_cast<int>(c)] =
            img.at(c, x, y);
  write_raster(r, path, bit_depth);
}

BayerImage read_bayer(const fs::path& path, CfaLayout layout) {
  Raster r = read_raster(path);
  if (r.channels != 1) throw IoError("Bayer file '" + path.string() + "' must be single-channel");
  return BayerImage(r.width, r.height, layout, std::move(r.samples));
}

void write_bayer(const BayerImage& img, const fs::path& path, int bit_depth) {
  Raster r{img.width(), img.height(), 1,
           std::vector<double>(img.samples().begin(), img.samples().end())};
  write_raster(r, path, bit_depth);
}

ValidityMask read_mask(const fs::path& path) {
  const Raster r = read_raster(path);
  ValidityMask mask(r.width, r.height, false);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      mask.set(x, y, r.samples[(static_cast<std::size_t>(y) * r.width + x) * r.channels] >= 0.5);
  return mask;
}

void write_mask(const ValidityMask& mask, const fs::path& path) {
  Raster r{mask.width(), mask.height(), 1, {}};
  r.samples.reserve(static_cast<std::size_t>(mask.width()) * mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) r.samples.push_back(mask(x, y) ? 1.0 : 0.0);
  write_raster(r, path, 8);
}

}  // namespace fglr
