#include <doctest.h>

#include "s2c/rng.hpp"
#include "s2c/types.hpp"

using namespace s2c;

namespace {
RasterImage const_image(int h, int w, double v, int c = 3) {
  return RasterImage(h, w, c, std::vector<double>(static_cast<size_t>(h) * w * c, v));
}
}  // namespace

TEST_CASE("validate returns an intact pair unchanged") {
  ImagePair p(const_image(64, 64, 0.5), const_image(64, 64, 0.25));
  const ImagePair& r = validate(p);
  CHECK(&r == &p);
}

TEST_CASE("validate rejects shape mismatches") {
  CHECK_THROWS_AS(ImagePair(const_image(64, 64, 0.5), const_image(64, 63, 0.5)),
                  ShapeMismatch);
  BinaryMask bad(32, 32);
  CHECK_THROWS_AS(
      ImagePair(const_image(64, 64, 0.5), const_image(64, 64, 0.5), bad),
      ShapeMismatch);
}

TEST_CASE("validate rejects NaN and out-of-range pixels") {
  RasterImage img = const_image(64, 64, 0.5);
  img.at(3, 4, 0) = std::numeric_limits<double>::quiet_NaN();
  ImagePair p(std::move(img), const_image(64, 64, 0.5));
  CHECK_THROWS_AS(validate(p), ValueRange);

  RasterImage img2 = const_image(64, 64, 0.5);
  img2.at(0, 0, 1) = 1.5;
  ImagePair p2(const_image(64, 64, 0.5), std::move(img2));
  CHECK_THROWS_AS(validate(p2), ValueRange);
}

TEST_CASE("constructors reject invariant violations (randomized)") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    switch (rng.uniform_int(0, 4)) {
      case 0: {  // undersized raster
        int h = rng.uniform_int(1, 31);
        CHECK_THROWS_AS(RasterImage(h, 64, 3), ShapeMismatch);
        break;
      }
      case 1: {  // bad channel count
        int c = rng.bernoulli() ? 2 : 5;
        CHECK_THROWS_AS(RasterImage(64, 64, c), ShapeMismatch);
        break;
      }
      case 2: {  // out-of-range pixel value
        std::vector<double> pix(64 * 64 * 3, 0.5);
        pix[rng.uniform_int(0, 64 * 64 * 3 - 1)] =
            rng.bernoulli() ? rng.uniform(1.001, 9.0) : rng.uniform(-9.0, -0.001);
        CHECK_THROWS_AS(RasterImage(64, 64, 3, std::move(pix)), ValueRange);
        break;
      }
      case 3: {
        SparsityConfig s{rng.bernoulli() ? 0.0 : 1.0, 16};
        CHECK_THROWS_AS(s.validate(), ValueRange);
        break;
      }
      case 4: {
        LossWeights w{-rng.uniform(0.01, 5.0), 1.0};
        CHECK_THROWS_AS(w.validate(), ValueRange);
        break;
      }
    }
  }
}

TEST_CASE("config defaults match the pinned constants") {
  MappingConfig m;
  CHECK(m.eta == doctest::Approx(std::log(1.0 / 0.07)).epsilon(1e-12));
  TripletConfig t;
  CHECK(t.margin == 1.0);
  SparsityConfig s;
  CHECK(s.grid_d == 16);
  LossWeights w;
  CHECK(w.alpha == 0.2);
  CHECK(w.beta == 1.0);
  RefineConfig r;
  CHECK(r.iou_threshold == 0.5);
}
