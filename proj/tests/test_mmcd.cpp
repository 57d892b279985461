#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "s2c/mapping.hpp"
#include "s2c/mmcd.hpp"
#include "s2c/rng.hpp"
#include "s2c/train.hpp"

using namespace s2c;
using namespace s2c::mmcd;

namespace {

LatentMap random_latent(int c, int h, int w, Rng& rng) {
  LatentMap m(c, h, w, 8);
  for (auto& v : m.features) v = rng.uniform(-1, 1);
  return m;
}

double brute_cosine(const LatentMap& a, const LatentMap& b) {
  double sum = 0;
  for (int r = 0; r < a.h; ++r)
    for (int col = 0; col < a.w; ++col) {
      double dot = 0, na = 0, nb = 0;
      for (int ch = 0; ch < a.c; ++ch) {
        dot += a.at(ch, r, col) * b.at(ch, r, col);
        na += a.at(ch, r, col) * a.at(ch, r, col);
        nb += b.at(ch, r, col) * b.at(ch, r, col);
      }
      sum += dot / (std::max(std::sqrt(na), 1e-8) *
                    std::max(std::sqrt(nb), 1e-8));
    }
  return sum / (a.h * a.w);
}

}  // namespace

TEST_CASE("het_triplet: single-sided hinge, collapse gives 1") {
  TripletConfig cfg;  // m = 1
  Rng rng(31);
  LatentMap y = random_latent(4, 2, 2, rng);
  // anchor == positive == negative: cos 1 - cos 1 + 1 = 1
  CHECK(het_triplet(y, y, y, cfg) == doctest::Approx(1.0));

  // perfect separation: negative antipodal, positive exact
  LatentMap ny = y;
  for (auto& v : ny.features) v = -v;
  CHECK(het_triplet(y, ny, y, cfg) == doctest::Approx(0.0));

  for (int t = 0; t < 10; ++t) {
    LatentMap a = random_latent(4, 2, 2, rng);
    LatentMap n = random_latent(4, 2, 2, rng);
    LatentMap p = random_latent(4, 2, 2, rng);
    double expect =
        std::max(brute_cosine(a, n) - brute_cosine(a, p) + 1.0, 0.0);
    CHECK(het_triplet(a, n, p, cfg) == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("het_info_nce: identical batches give log N, matches brute force") {
  Rng rng(32);
  LatentMap same = random_latent(4, 2, 2, rng);
  for (int n : {2, 4}) {
    losses::LatentBatch b(static_cast<size_t>(n), same);
    CHECK(het_info_nce(b, b) ==
          doctest::Approx(2.0 * std::log(n)).epsilon(1e-6));
  }

  const int n = 3;
  losses::LatentBatch rgb, sar;
  for (int i = 0; i < n; ++i) {
    rgb.push_back(random_latent(4, 2, 2, rng));
    sar.push_back(random_latent(4, 2, 2, rng));
  }
  double expect = 0;
  for (int u = 0; u < n; ++u) {
    double d1 = 0, d2 = 0;
    for (int v = 0; v < n; ++v) {
      d1 += std::exp(brute_cosine(rgb[u], sar[v]));
      d2 += std::exp(brute_cosine(sar[u], rgb[v]));
    }
    expect += -std::log(std::exp(brute_cosine(rgb[u], sar[u])) / d1) / n;
    expect += -std::log(std::exp(brute_cosine(sar[u], rgb[u])) / d2) / n;
  }
  CHECK(het_info_nce(rgb, sar) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("het losses: gradients match finite differences") {
  Rng rng(33);
  const int c = 4, h = 2, w = 2;
  TripletConfig tcfg;
  auto tensor_of = [&](const LatentMap& m) {
    Tensor t({c, h, w});
    t.data = m.features;
    return t;
  };
  auto latent_of = [&](const Tensor& t) {
    LatentMap m(c, h, w, 8);
    m.features = t.data;
    return m;
  };

  encoder::EncoderParams tp;
  tp["a"] = tensor_of(random_latent(c, h, w, rng));
  tp["n"] = tensor_of(random_latent(c, h, w, rng));
  tp["p"] = tensor_of(random_latent(c, h, w, rng));
  auto tri_loss = [&](const encoder::EncoderParams& q) {
    return het_triplet(latent_of(q.at("a")), latent_of(q.at("n")),
                       latent_of(q.at("p")), tcfg);
  };
  auto tri_grad = [&](const encoder::EncoderParams& q) {
    LatentMap ga(c, h, w, 8), gn(c, h, w, 8), gp(c, h, w, 8);
    het_triplet_backward(latent_of(q.at("a")), latent_of(q.at("n")),
                         latent_of(q.at("p")), tcfg, &ga, &gn, &gp);
    encoder::ParamGrads out;
    out["a"] = tensor_of(ga);
    out["n"] = tensor_of(gn);
    out["p"] = tensor_of(gp);
    return out;
  };
  CHECK(train::grad_check(tri_loss, tri_grad, tp, 1e-5).max_rel_err < 1e-4);

  encoder::EncoderParams np;
  for (const char* nm : {"r0", "r1", "s0", "s1"})
    np[nm] = tensor_of(random_latent(c, h, w, rng));
  auto nce_loss = [&](const encoder::EncoderParams& q) {
    losses::LatentBatch rgb = {latent_of(q.at("r0")), latent_of(q.at("r1"))};
    losses::LatentBatch sar = {latent_of(q.at("s0")), latent_of(q.at("s1"))};
    return het_info_nce(rgb, sar);
  };
  auto nce_grad = [&](const encoder::EncoderParams& q) {
    losses::LatentBatch rgb = {latent_of(q.at("r0")), latent_of(q.at("r1"))};
    losses::LatentBatch sar = {latent_of(q.at("s0")), latent_of(q.at("s1"))};
    std::vector<LatentMap> gr(2, LatentMap(c, h, w, 8)),
        gs(2, LatentMap(c, h, w, 8));
    het_info_nce_backward(rgb, sar, &gr, &gs);
    encoder::ParamGrads out;
    out["r0"] = tensor_of(gr[0]);
    out["r1"] = tensor_of(gr[1]);
    out["s0"] = tensor_of(gs[0]);
    out["s1"] = tensor_of(gs[1]);
    return out;
  };
  CHECK(train::grad_check(nce_loss, nce_grad, np, 1e-5).max_rel_err < 1e-4);
}

TEST_CASE("DualEncoder enforces matching latent geometry") {
  Rng rng(34);
  auto [rs, rp] = encoder::reference_encoder(3, 16, 8, rng);
  auto [ss, sp] = encoder::reference_encoder(1, 16, 8, rng);
  CHECK_NOTHROW(DualEncoder(rs, rp, ss, sp));

  auto [bs, bp] = encoder::reference_encoder(1, 8, 8, rng);  // channel clash
  CHECK_THROWS_AS(DualEncoder(rs, rp, bs, bp), ShapeMismatch);
  auto [ts, tpp] = encoder::reference_encoder(1, 16, 4, rng);  // stride clash
  CHECK_THROWS_AS(DualEncoder(rs, rp, ts, tpp), ShapeMismatch);
}

TEST_CASE("mmcd_infer: shape, determinism and identical-latent behavior") {
  Rng rng(35);
  auto [rs, rp] = encoder::reference_encoder(3, 16, 8, rng);
  auto [ss, sp] = encoder::reference_encoder(1, 16, 8, rng);
  DualEncoder dual(rs, rp, ss, sp);

  RasterImage rgb(64, 64, 3), sar(64, 64, 1);
  Rng prng(36);
  for (auto& v : rgb.pixels()) v = prng.uniform(0, 1);
  for (auto& v : sar.pixels()) v = prng.uniform(0, 1);

  MappingConfig mcfg;
  BinaryMask m = mmcd_infer(dual, rgb, sar, mcfg, 0.5);
  CHECK(m.h == 64);
  CHECK(m.w == 64);
  BinaryMask m2 = mmcd_infer(dual, rgb, sar, mcfg, 0.5);
  CHECK(m == m2);

  // binarize-only path: thresholding at ~0 marks everything, at ~1 nothing
  CHECK(mmcd_infer(dual, rgb, sar, mcfg, 1e-6).area() == 64 * 64);
  CHECK(mmcd_infer(dual, rgb, sar, mcfg, 1.0 - 1e-9).area() == 0);
}
