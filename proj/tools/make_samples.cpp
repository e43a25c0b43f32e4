// Writes the bundled synthetic portrait pair and their label masks.
//
//   make_samples <out_dir>
//
// Labels: 0 background, 1 skin, 2 hair, 3 eyes, 4 mouth.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>

#include "pst/correspondence.hpp"
#include "pst/io.hpp"

namespace {

struct Palette {
  float bg_top[3], bg_bottom[3], skin[3], hair[3], eye[3], mouth[3];
  float texture;  // amplitude of the seeded brush noise
  float stripes;  // amplitude of diagonal hatching
};

struct Geometry {
  double cx, cy, rx, ry;  // face ellipse
  double hair_lift;       // how far hair extends above the face
};

int label_at(const Geometry& g, double x, double y) {
  const double fx = (x - g.cx) / g.rx, fy = (y - g.cy) / g.ry;
  const bool face = fx * fx + fy * fy <= 1.0;
  const double hx = (x - g.cx) / (g.rx * 1.18), hy = (y - (g.cy - g.hair_lift)) / (g.ry * 1.05);
  const bool hair_blob = hx * hx + hy * hy <= 1.0 && y < g.cy - 0.1 * g.ry;
  for (int side : {-1, 1}) {
    const double ex = (x - (g.cx + side * 0.38 * g.rx)) / (0.16 * g.rx);
    const double ey = (y - (g.cy - 0.12 * g.ry)) / (0.08 * g.ry);
    if (ex * ex + ey * ey <= 1.0) return 3;
  }
  const double mx = (x - g.cx) / (0.32 * g.rx), my = (y - (g.cy + 0.5 * g.ry)) / (0.07 * g.ry);
  if (mx * mx + my * my <= 1.0) return 4;
  if (hair_blob && !(face && y > g.cy - 0.55 * g.ry)) return 2;
  if (face) return 1;
  return 0;
}

void render(const Geometry& g, const Palette& p, std::uint32_t seed, int size, pst::Image& image,
            pst::SemanticMask& mask) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> noise(-1.0f, 1.0f);
  image = pst::Image(size, size, 3);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(size * size));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int label = label_at(g, x + 0.5, y + 0.5);
      labels[static_cast<std::size_t>(y * size + x)] = label;
      const float t = static_cast<float>(y) / static_cast<float>(size - 1);
      const float shade = 1.0f - 0.25f * static_cast<float>(std::hypot(x - g.cx, y - g.cy) / size);
      const float hatch = p.stripes * std::sin(0.6f * static_cast<float>(x + y));
      const float grain = p.texture * noise(rng);
      for (int c = 0; c < 3; ++c) {
        float v = 0.0f;
        switch (label) {
          case 0: v = (1 - t) * p.bg_top[c] + t * p.bg_bottom[c]; break;
          case 1: v = p.skin[c] * shade; break;
          case 2: v = p.hair[c] + 0.08f * std::sin(0.9f * static_cast<float>(x)); break;
          case 3: v = p.eye[c]; break;
          default: v = p.mouth[c]; break;
        }
        image.at(y, x, c) = std::clamp(v + hatch + grain, 0.0f, 1.0f);
      }
    }
  mask = pst::SemanticMask(size, size, 5, std::move(labels));
}

void write_mask(const pst::SemanticMask& mask, const std::filesystem::path& path) {
  // Label ids are stored as raw 8-bit values, so scale them back from [0, 1].
  pst::Image img(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) img.data[i] = static_cast<float>(mask.labels[i]) / 255.0f;
  pst::write_png(img, path);
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(dir);
  constexpr int kSize = 128;

  const Palette photo{{0.55f, 0.70f, 0.85f}, {0.25f, 0.35f, 0.50f}, {0.92f, 0.74f, 0.62f}, {0.22f, 0.14f, 0.08f},
                      {0.15f, 0.20f, 0.30f}, {0.75f, 0.30f, 0.32f}, 0.015f, 0.0f};
  const Palette painting{{0.35f, 0.60f, 0.55f}, {0.10f, 0.28f, 0.32f}, {0.98f, 0.78f, 0.50f}, {0.45f, 0.10f, 0.35f},
                         {0.05f, 0.05f, 0.05f}, {0.95f, 0.10f, 0.10f}, 0.05f, 0.06f};
  const Geometry geo_a{64.0, 70.0, 30.0, 38.0, 14.0};
  const Geometry geo_b{60.0, 66.0, 34.0, 42.0, 18.0};

  pst::Image image;
  pst::SemanticMask mask;
  render(geo_a, photo, 7u, kSize, image, mask);
  pst::write_png(image, dir / "portrait_a.png");
  write_mask(mask, dir / "mask_a.png");
  render(geo_b, painting, 11u, kSize, image, mask);
  pst::write_png(image, dir / "portrait_b.png");
  write_mask(mask, dir / "mask_b.png");
  std::cout << "wrote samples to " << dir.string() << '\n';
  return 0;
}
