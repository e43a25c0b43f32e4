#include <doctest.h>
#include <png.h>

#include <bit>
#include <cstdio>
#include <fstream>

#include "pst/io.hpp"
#include "test_util.hpp"

using namespace pst;
using pst::testing::scratch_dir;

namespace {

// Minimal libpng writer for formats the library itself never writes.
void write_png_raw(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
                   const std::vector<unsigned char>& bytes, int row_bytes) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_color palette[2] = {{0, 0, 0}, {255, 0, 0}};
    png_set_PLTE(png, info, palette, 2);
  }
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) png_write_row(png, bytes.data() + y * row_bytes);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// Independent NPY writer with an arbitrary header dict.
void write_npy_with_header(const std::filesystem::path& path, const std::string& dict, std::size_t payload_bytes) {
  std::string header = dict;
  while ((10 + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::ofstream out(path, std::ios::binary);
  out.write("\x93NUMPY\x01\x00", 8);
  const unsigned char len[2] = {static_cast<unsigned char>(header.size() & 0xff),
                                static_cast<unsigned char>(header.size() >> 8)};
  out.write(reinterpret_cast<const char*>(len), 2);
  out << header;
  out << std::string(payload_bytes, '\0');
}

}  // namespace

TEST_CASE("tensor rejects invalid shapes") {
  CHECK_THROWS_AS(Tensor(Shape{}), PreconditionError);
  CHECK_THROWS_AS(Tensor(Shape{1, 2, 3, 4, 5}), PreconditionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), PreconditionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>(3)), PreconditionError);
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  t(1, 2, 3) = 7.0f;
  CHECK(t[23] == 7.0f);
  CHECK(t.plane(1)(2, 3) == 7.0f);
  CHECK_THROWS_AS(t.reshaped({5, 5}), PreconditionError);
}

TEST_CASE("read_png scaling examples") {
  const auto dir = scratch_dir("png_scaling");
  write_png(Image(2, 2, 3, 0.0f), dir / "black.png");
  const Image black = read_png(dir / "black.png");
  CHECK(black.height == 2);
  CHECK(black.channels == 3);
  for (float v : black.data) CHECK(v == 0.0f);

  write_png_raw(dir / "full.png", 1, 1, PNG_COLOR_TYPE_GRAY, 8, {255}, 1);
  CHECK(read_png(dir / "full.png").data[0] == 1.0f);

  write_png_raw(dir / "mid.png", 1, 1, PNG_COLOR_TYPE_GRAY, 8, {128}, 1);
  CHECK(read_png(dir / "mid.png").data[0] == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(read_png(dir / "mid.png").data[0] == 128.0f / 255.0f);
}

TEST_CASE("write_png quantization rule") {
  CHECK(quantize_u8(1.0f) == 255);
  CHECK(quantize_u8(0.0f) == 0);
  CHECK(quantize_u8(0.5f) == 128);
  CHECK(quantize_u8(-0.2f) == 0);
  CHECK(quantize_u8(1.7f) == 255);
}

TEST_CASE("16-bit and alpha PNGs") {
  const auto dir = scratch_dir("png16");
  // One RGBA pixel: R = 65535, G = 0, B = 32768, A = 1234 (dropped).
  write_png_raw(dir / "rgba16.png", 1, 1, PNG_COLOR_TYPE_RGB_ALPHA, 16, {0xff, 0xff, 0, 0, 0x80, 0, 0x04, 0xd2}, 8);
  const Image img = read_png(dir / "rgba16.png");
  REQUIRE(img.channels == 3);
  CHECK(img.data[0] == 1.0f);
  CHECK(img.data[1] == 0.0f);
  CHECK(img.data[2] == 32768.0f / 65535.0f);

  write_png_raw(dir / "ga.png", 2, 1, PNG_COLOR_TYPE_GRAY_ALPHA, 8, {10, 255, 20, 0}, 4);
  const Image ga = read_png(dir / "ga.png");
  CHECK(ga.channels == 1);
  CHECK(ga.data == std::vector<float>{10.0f / 255.0f, 20.0f / 255.0f});
}

TEST_CASE("PNG errors") {
  const auto dir = scratch_dir("png_errors");
  CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);
  write_png_raw(dir / "palette.png", 2, 1, PNG_COLOR_TYPE_PALETTE, 8, {0, 1}, 2);
  CHECK_THROWS_WITH_AS(read_png(dir / "palette.png"), doctest::Contains("palette"), FormatError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(read_png(dir / "junk.png"), FormatError);
  CHECK_THROWS_AS(write_png(Image(1, 1, 1), dir / "no_such_dir" / "x.png"), IoError);
}

TEST_CASE("PNG round trip is exact on the 8-bit grid") {
  const auto dir = scratch_dir("png_roundtrip");
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> level(0, 255);
  for (int trial = 0; trial < 10; ++trial) {
    const Index c = trial % 2 ? 3 : 1;
    Image img(1 + trial, 3 + trial * 2, c);
    for (float& v : img.data) v = static_cast<float>(level(rng)) / 255.0f;
    write_png(img, dir / "rt.png");
    const Image back = read_png(dir / "rt.png");
    CHECK(back == img);
    for (float v : back.data) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("NPY round trips bitwise") {
  const auto dir = scratch_dir("npy");
  Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  write_npy(t, dir / "a.npy");
  CHECK(read_npy(dir / "a.npy") == t);

  Tensor neg_zero({1}, {-0.0f});
  write_npy(neg_zero, dir / "z.npy");
  CHECK(std::signbit(read_npy(dir / "z.npy")[0]));

  std::mt19937 rng(11);
  std::uniform_int_distribution<int> rank_dist(1, 4), dim_dist(1, 5);
  for (int trial = 0; trial < 25; ++trial) {
    Shape shape(static_cast<std::size_t>(rank_dist(rng)));
    for (auto& d : shape) d = dim_dist(rng);
    const Tensor x = pst::testing::random_tensor(shape, rng, -1e6f, 1e6f);
    write_npy(x, dir / "r.npy");
    const Tensor y = read_npy(dir / "r.npy");
    REQUIRE(y.shape() == x.shape());
    for (Index i = 0; i < x.size(); ++i)
      CHECK(std::bit_cast<std::uint32_t>(x[i]) == std::bit_cast<std::uint32_t>(y[i]));
  }
}

TEST_CASE("NPY header layout") {
  const auto dir = scratch_dir("npy_header");
  write_npy(Tensor({2, 3}), dir / "h.npy");
  std::ifstream in(dir / "h.npy", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  CHECK((10 + header_len) % 64 == 0);
  CHECK(bytes.substr(10, 62).rfind("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }", 0) == 0);
  CHECK(bytes[10 + header_len - 1] == '\n');
  CHECK(bytes.size() == 10 + header_len + 6 * 4);

  write_npy(Tensor({7}), dir / "one.npy");
  std::ifstream in1(dir / "one.npy", std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(in1)), std::istreambuf_iterator<char>());
  CHECK(b1.find("'shape': (7,)") != std::string::npos);
}

TEST_CASE("NPY rejects unsupported files loudly") {
  const auto dir = scratch_dir("npy_bad");
  write_npy_with_header(dir / "f8.npy", "{'descr': '<f8', 'fortran_order': False, 'shape': (2,), }", 16);
  CHECK_THROWS_WITH_AS(read_npy(dir / "f8.npy"), doctest::Contains("dtype"), FormatError);
  write_npy_with_header(dir / "fo.npy", "{'descr': '<f4', 'fortran_order': True, 'shape': (2, 2), }", 16);
  CHECK_THROWS_WITH_AS(read_npy(dir / "fo.npy"), doctest::Contains("fortran_order"), FormatError);
  write_npy_with_header(dir / "r5.npy", "{'descr': '<f4', 'fortran_order': False, 'shape': (1, 1, 1, 1, 1), }", 4);
  CHECK_THROWS_WITH_AS(read_npy(dir / "r5.npy"), doctest::Contains("rank"), FormatError);
  write_npy_with_header(dir / "short.npy", "{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }", 8);
  CHECK_THROWS_AS(read_npy(dir / "short.npy"), FormatError);
  CHECK_THROWS_AS(read_npy(dir / "missing.npy"), IoError);
}

TEST_CASE("image helpers") {
  Image img(3, 5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i % 7) / 7.0f;
  CHECK(to_image(to_tensor(img)) == img);
  const Image padded = pad_to_multiple(img, 4);
  CHECK(padded.height == 4);
  CHECK(padded.width == 8);
  CHECK(padded.at(3, 7, 1) == img.at(2, 4, 1));
  CHECK(crop(padded, 3, 5) == img);
}
