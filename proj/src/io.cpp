#include "pst/io.hpp"

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <regex>
#include <string>

namespace pst {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngErrorState {
  std::jmp_buf jump;
  char message[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof state->message, "%s", msg);
  std::longjmp(state->jump, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

std::uint8_t quantize_u8(float v) {
  const float scaled = std::floor(v * 255.0f + 0.5f);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

RawPng read_png_raw(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open PNG '" + path.string() + "'");

  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() || png_sig_cmp(sig.data(), 0, 8) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file");
  }

  PngErrorState err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  RawPng raw;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;

  if (setjmp(err.jump)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode error in '" + path.string() + "': " + err.message);
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported PNG color type (palette) in '" + path.string() +
                      "'; convert to gray or RGB first");
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  raw.height = png_get_image_height(png, info);
  raw.width = png_get_image_width(png, info);
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  pixels.resize(row_bytes * static_cast<std::size_t>(raw.height));
  rows.resize(static_cast<std::size_t>(raw.height));
  for (Index y = 0; y < raw.height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (raw.channels != 1 && raw.channels != 3) {
    throw FormatError("unsupported PNG channel count " + std::to_string(raw.channels));
  }
  const std::size_t count = static_cast<std::size_t>(raw.height * raw.width * raw.channels);
  raw.samples.resize(count);
  if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i)
      raw.samples[i] = static_cast<std::uint16_t>((pixels[2 * i] << 8) | pixels[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < count; ++i) raw.samples[i] = pixels[i];
  }
  return raw;
}

Image read_png(const std::filesystem::path& path) {
  const RawPng raw = read_png_raw(path);
  Image image(raw.height, raw.width, raw.channels);
  const float full_scale = raw.bit_depth == 16 ? 65535.0f : 255.0f;
  for (std::size_t i = 0; i < raw.samples.size(); ++i) image.data[i] = static_cast<float>(raw.samples[i]) / full_scale;
  return image;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  require(!image.empty(), "write_png: empty image");
  require(image.channels == 1 || image.channels == 3, "write_png: image must have 1 or 3 channels");
  std::vector<png_byte> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize_u8(image.data[i]);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (Index y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] = bytes.data() + y * image.width * image.channels;

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write PNG '" + path.string() + "'");

  PngErrorState err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(err.jump)) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode error for '" + path.string() + "': " + err.message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------------------
// NPY

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  return v;
}

}  // namespace

Tensor read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open NPY '" + path.string() + "'");

  char magic[6];
  unsigned char version[2];
  in.read(magic, 6);
  in.read(reinterpret_cast<char*>(version), 2);
  if (!in || std::memcmp(magic, kNpyMagic, 6) != 0) throw FormatError("'" + path.string() + "' is not an NPY file");
  if (version[0] != 1 || version[1] != 0) {
    throw FormatError("NPY version " + std::to_string(version[0]) + "." + std::to_string(version[1]) +
                      " not supported (only 1.0)");
  }
  unsigned char len_bytes[2];
  in.read(reinterpret_cast<char*>(len_bytes), 2);
  const std::size_t header_len = len_bytes[0] | (len_bytes[1] << 8);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError("truncated NPY header");

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')"))) {
    throw FormatError("NPY header has no 'descr'");
  }
  if (m[1] != "<f4") throw FormatError("NPY dtype '" + m[1].str() + "' not supported (need '<f4')");
  if (!std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*(True|False))"))) {
    throw FormatError("NPY header has no 'fortran_order'");
  }
  if (m[1] == "True") throw FormatError("NPY fortran_order=True not supported (need C order)");
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw FormatError("NPY header has no 'shape'");
  }
  Shape shape;
  const std::string dims = m[1];
  const std::regex number(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), number); it != std::sregex_iterator(); ++it) {
    shape.push_back(std::stoll(it->str()));
  }
  if (shape.empty() || static_cast<Index>(shape.size()) > kMaxRank) {
    throw FormatError("NPY rank " + std::to_string(shape.size()) + " not supported (need 1..4)");
  }
  for (Index d : shape) {
    if (d <= 0) throw FormatError("NPY shape " + shape_string(shape) + " has a zero dimension");
  }

  std::vector<float> data(static_cast<std::size_t>(shape_size(shape)));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw FormatError("truncated NPY payload in '" + path.string() + "'");
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : data) v = std::bit_cast<float>(to_little(std::bit_cast<std::uint32_t>(v)));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_npy(const Tensor& tensor, const std::filesystem::path& path) {
  require(!tensor.empty(), "write_npy: empty tensor");
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (";
  for (Index i = 0; i < tensor.rank(); ++i) {
    dict += std::to_string(tensor.dim(i));
    if (tensor.rank() == 1 || i + 1 < tensor.rank()) dict += ",";
    if (i + 1 < tensor.rank()) dict += " ";
  }
  dict += "), }";
  // 10 bytes of preamble + dict + padding + '\n' is a multiple of 64.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write NPY '" + path.string() + "'");
  out.write(kNpyMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const char len[2] = {static_cast<char>(dict.size() & 0xff), static_cast<char>((dict.size() >> 8) & 0xff)};
  out.write(len, 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  for (float v : tensor.data()) {
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), 4);
  }
  if (!out) throw IoError("failed writing NPY '" + path.string() + "'");
}

}  // namespace pst
