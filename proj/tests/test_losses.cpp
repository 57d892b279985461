#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "s2c/losses.hpp"
#include "s2c/rng.hpp"
#include "s2c/train.hpp"

using namespace s2c;
using namespace s2c::losses;

namespace {

LatentMap random_latent(int c, int h, int w, Rng& rng, double lo = -1,
                        double hi = 1) {
  LatentMap m(c, h, w, 8);
  for (auto& v : m.features) v = rng.uniform(lo, hi);
  return m;
}

// Brute-force per-patch cosine mean, written independently of the library.
double brute_patch_cosine(const LatentMap& a, const LatentMap& b) {
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

LatentMap scaled(const LatentMap& m, double k) {
  LatentMap out = m;
  for (auto& v : out.features) v *= k;
  return out;
}

}  // namespace

TEST_CASE("patch_cosine: self, antipodal, brute-force oracle") {
  Rng rng(1);
  LatentMap a = random_latent(4, 2, 2, rng, 0.1, 1.0);
  CHECK(patch_cosine(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(patch_cosine(a, scaled(a, -1.0)) == doctest::Approx(-1.0).epsilon(1e-12));

  for (int t = 0; t < 20; ++t) {
    LatentMap x = random_latent(4, 2, 2, rng);
    LatentMap y = random_latent(4, 2, 2, rng);
    CHECK(patch_cosine(x, y) ==
          doctest::Approx(brute_patch_cosine(x, y)).epsilon(1e-6));
  }
}

TEST_CASE("patch_cosine: scale invariance for positive rescaling") {
  Rng rng(2);
  LatentMap a = random_latent(6, 3, 3, rng);
  LatentMap b = random_latent(6, 3, 3, rng);
  double base = patch_cosine(a, b);
  CHECK(patch_cosine(scaled(a, 3.7), scaled(b, 0.2)) ==
        doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("patch_cosine rejects shape mismatch") {
  Rng rng(3);
  LatentMap a = random_latent(4, 2, 2, rng);
  LatentMap b = random_latent(4, 2, 3, rng);
  CHECK_THROWS_AS(patch_cosine(a, b), ShapeMismatch);
}

TEST_CASE("triplet_loss: ideal separation is 0, collapse is 2") {
  // y1 and y2 patchwise orthogonal, copies exact
  LatentMap y1(2, 1, 1, 8), y2(2, 1, 1, 8);
  y1.at(0, 0, 0) = 1.0;
  y2.at(1, 0, 0) = 1.0;
  TripletConfig cfg;  // m = 1
  CHECK(triplet_loss(y1, y1, y2, y2, cfg) == doctest::Approx(0.0));

  Rng rng(4);
  LatentMap y = random_latent(4, 2, 2, rng, 0.1, 1.0);
  CHECK(triplet_loss(y, y, y, y, cfg) == doctest::Approx(2.0));
}

TEST_CASE("triplet_loss: random latents match the direct formula") {
  Rng rng(5);
  TripletConfig cfg;
  for (int t = 0; t < 20; ++t) {
    LatentMap y1 = random_latent(4, 2, 2, rng);
    LatentMap b1 = random_latent(4, 2, 2, rng);
    LatentMap y2 = random_latent(4, 2, 2, rng);
    LatentMap b2 = random_latent(4, 2, 2, rng);
    double expect =
        std::max(brute_patch_cosine(y1, y2) - brute_patch_cosine(y1, b1) + 1, 0.0) +
        std::max(brute_patch_cosine(y2, y1) - brute_patch_cosine(y2, b2) + 1, 0.0);
    CHECK(triplet_loss(y1, b1, y2, b2, cfg) ==
          doctest::Approx(expect).epsilon(1e-6));
    CHECK(triplet_loss(y1, b1, y2, b2, cfg) >= 0.0);
    CHECK(triplet_loss(y1, b1, y2, b2, cfg) <= 2.0 * (1.0 + cfg.margin));
  }
}

TEST_CASE("info_nce: constructed N=2 match/mismatch value") {
  // antipodal single-patch latents: match cosine 1, mismatch -1
  LatentMap v(2, 1, 1, 8), nv(2, 1, 1, 8);
  v.at(0, 0, 0) = 1.0;
  nv.at(0, 0, 0) = -1.0;
  LatentBatch y1 = {v, nv}, b2 = {v, nv};
  LatentBatch y2 = {v, nv}, b1 = {v, nv};
  // each of the 4 terms: -log(e / (e + e^-2... )) with logits {1, -1}
  double term = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0)));
  double expect = 4.0 * term / 2.0;  // two phases, N = 2
  CHECK(info_nce(y1, y2, b1, b2) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(expect == doctest::Approx(2.0 * std::log1p(std::exp(-2.0))).epsilon(1e-9));
}

TEST_CASE("info_nce: uniform similarities give 2 log N") {
  Rng rng(6);
  LatentMap same = random_latent(4, 2, 2, rng, 0.1, 1.0);
  for (int n : {2, 3, 5}) {
    LatentBatch b(static_cast<size_t>(n), same);
    CHECK(info_nce(b, b, b, b) ==
          doctest::Approx(2.0 * std::log(n)).epsilon(1e-6));
  }
}

TEST_CASE("info_nce: brute-force double-loop oracle") {
  Rng rng(7);
  const int n = 4;
  LatentBatch y1, y2, b1, b2;
  for (int i = 0; i < n; ++i) {
    y1.push_back(random_latent(4, 2, 2, rng));
    y2.push_back(random_latent(4, 2, 2, rng));
    b1.push_back(random_latent(4, 2, 2, rng));
    b2.push_back(random_latent(4, 2, 2, rng));
  }
  double expect = 0;
  for (int u = 0; u < n; ++u) {
    double den1 = 0, den2 = 0;
    for (int v = 0; v < n; ++v) {
      den1 += std::exp(brute_patch_cosine(y1[u], b2[v]));
      den2 += std::exp(brute_patch_cosine(y2[u], b1[v]));
    }
    expect += -std::log(std::exp(brute_patch_cosine(y1[u], b2[u])) / den1) / n;
    expect += -std::log(std::exp(brute_patch_cosine(y2[u], b1[u])) / den2) / n;
  }
  CHECK(info_nce(y1, y2, b1, b2) == doctest::Approx(expect).epsilon(1e-6));
  CHECK(info_nce(y1, y2, b1, b2) >= 0.0);
}

TEST_CASE("info_nce: batch permutation leaves the value unchanged") {
  Rng rng(8);
  const int n = 4;
  LatentBatch y1, y2, b1, b2;
  for (int i = 0; i < n; ++i) {
    y1.push_back(random_latent(4, 2, 2, rng));
    y2.push_back(random_latent(4, 2, 2, rng));
    b1.push_back(random_latent(4, 2, 2, rng));
    b2.push_back(random_latent(4, 2, 2, rng));
  }
  double base = info_nce(y1, y2, b1, b2);
  std::vector<int> perm = {2, 0, 3, 1};
  LatentBatch py1, py2, pb1, pb2;
  for (int i : perm) {
    py1.push_back(y1[i]);
    py2.push_back(y2[i]);
    pb1.push_back(b1[i]);
    pb2.push_back(b2[i]);
  }
  CHECK(info_nce(py1, py2, pb1, pb2) == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("info_nce rejects N < 2") {
  Rng rng(9);
  LatentBatch one = {random_latent(4, 2, 2, rng)};
  CHECK_THROWS_AS(info_nce(one, one, one, one), BatchTooSmall);
}

TEST_CASE("grid_sparsity: zero, uniform and hand-partitioned maps") {
  SparsityConfig cfg{0.5, 16};
  ChangeProbMap zero(32, 32, 0.f);
  CHECK(grid_sparsity(zero, cfg) == 0.0);

  ChangeProbMap ones(32, 32, 1.f);
  CHECK(grid_sparsity(ones, cfg) == doctest::Approx(1.0));  // n = 2 of 4

  // 3 grids at 0, 1 grid at 1, T = 0.25 -> n = 3 lowest are the zeros
  SparsityConfig cfg2{0.25, 16};
  ChangeProbMap mixed(32, 32, 0.f);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) mixed.set(r, c, 1.f);
  CHECK(grid_sparsity(mixed, cfg2) == doctest::Approx(0.0));
}

TEST_CASE("grid_sparsity: GridTooLarge when no full grid fits") {
  ChangeProbMap tiny(8, 8, 0.5f);
  CHECK_THROWS_AS(grid_sparsity(tiny, SparsityConfig{0.2, 16}), GridTooLarge);
}

TEST_CASE("grid_sparsity: monotone non-decreasing in any pixel") {
  Rng rng(10);
  SparsityConfig cfg{0.3, 4};
  ChangeProbMap m(16, 16);
  for (auto& p : m.probs) p = static_cast<float>(rng.uniform(0, 1));
  double base = grid_sparsity(m, cfg);
  for (int t = 0; t < 30; ++t) {
    ChangeProbMap bumped = m;
    size_t i = static_cast<size_t>(rng.uniform_int(0, 255));
    bumped.probs[i] = std::min(1.f, bumped.probs[i] + 0.2f);
    CHECK(grid_sparsity(bumped, cfg) >= base - 1e-12);
  }
  CHECK(base >= 0.0);
  CHECK(base <= 1.0);
}

TEST_CASE("grid_sparsity gradient matches finite differences") {
  Rng rng(11);
  SparsityConfig cfg{0.3, 4};
  ChangeProbMap m(16, 16);
  for (auto& p : m.probs) p = static_cast<float>(rng.uniform(0.05, 0.95));
  std::vector<double> g(m.probs.size(), 0.0);
  grid_sparsity_backward(m, cfg, &g);
  // spot-check a handful of pixels away from sorting ties
  for (int t = 0; t < 12; ++t) {
    size_t i = static_cast<size_t>(rng.uniform_int(0, 255));
    ChangeProbMap up = m, dn = m;
    up.probs[i] += 1e-4f;
    dn.probs[i] -= 1e-4f;
    double fd = (grid_sparsity(up, cfg) - grid_sparsity(dn, cfg)) / 2e-4;
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-3));
  }
}

TEST_CASE("total_loss arithmetic") {
  LossWeights w;  // alpha 0.2, beta 1.0
  CHECK(total_loss(1, 2, 3, w) == doctest::Approx(4.4));
  LossWeights zero{0.0, 0.0};
  CHECK(total_loss(1.5, 7, 9, zero) == doctest::Approx(1.5));
  CHECK(total_loss(0, 0, 0, w) == 0.0);
  LossWeights no_tri{0.5, 2.0, 0.0};
  CHECK(total_loss(1.5, 2, 3, no_tri) == doctest::Approx(7.0));
}

TEST_CASE("triplet and info_nce gradients match finite differences") {
  Rng rng(12);
  const int c = 4, h = 2, w = 2;
  TripletConfig tcfg;

  // pack four latents into one parameter map for grad_check
  encoder::EncoderParams params;
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
  params["y1"] = tensor_of(random_latent(c, h, w, rng));
  params["b1"] = tensor_of(random_latent(c, h, w, rng));
  params["y2"] = tensor_of(random_latent(c, h, w, rng));
  params["b2"] = tensor_of(random_latent(c, h, w, rng));

  auto tri_loss = [&](const encoder::EncoderParams& p) {
    return triplet_loss(latent_of(p.at("y1")), latent_of(p.at("b1")),
                        latent_of(p.at("y2")), latent_of(p.at("b2")), tcfg);
  };
  auto tri_grad = [&](const encoder::EncoderParams& p) {
    LatentMap g1(c, h, w, 8), gb1(c, h, w, 8), g2(c, h, w, 8), gb2(c, h, w, 8);
    triplet_loss_backward(latent_of(p.at("y1")), latent_of(p.at("b1")),
                          latent_of(p.at("y2")), latent_of(p.at("b2")), tcfg,
                          &g1, &gb1, &g2, &gb2);
    encoder::ParamGrads out;
    out["y1"] = tensor_of(g1);
    out["b1"] = tensor_of(gb1);
    out["y2"] = tensor_of(g2);
    out["b2"] = tensor_of(gb2);
    return out;
  };
  CHECK(train::grad_check(tri_loss, tri_grad, params, 1e-5).max_rel_err < 1e-4);

  // infoNCE on an N=2 toy batch
  encoder::EncoderParams ip;
  for (const char* nm : {"y1a", "y1b", "y2a", "y2b", "b1a", "b1b", "b2a", "b2b"})
    ip[nm] = tensor_of(random_latent(c, h, w, rng));
  auto batches = [&](const encoder::EncoderParams& p) {
    return std::array<LatentBatch, 4>{
        LatentBatch{latent_of(p.at("y1a")), latent_of(p.at("y1b"))},
        LatentBatch{latent_of(p.at("y2a")), latent_of(p.at("y2b"))},
        LatentBatch{latent_of(p.at("b1a")), latent_of(p.at("b1b"))},
        LatentBatch{latent_of(p.at("b2a")), latent_of(p.at("b2b"))}};
  };
  auto nce_loss = [&](const encoder::EncoderParams& p) {
    auto b = batches(p);
    return info_nce(b[0], b[1], b[2], b[3]);
  };
  auto nce_grad = [&](const encoder::EncoderParams& p) {
    auto b = batches(p);
    std::vector<LatentMap> g1(2, LatentMap(c, h, w, 8)),
        g2(2, LatentMap(c, h, w, 8)), gb1(2, LatentMap(c, h, w, 8)),
        gb2(2, LatentMap(c, h, w, 8));
    info_nce_backward(b[0], b[1], b[2], b[3], &g1, &g2, &gb1, &gb2);
    encoder::ParamGrads out;
    out["y1a"] = tensor_of(g1[0]);
    out["y1b"] = tensor_of(g1[1]);
    out["y2a"] = tensor_of(g2[0]);
    out["y2b"] = tensor_of(g2[1]);
    out["b1a"] = tensor_of(gb1[0]);
    out["b1b"] = tensor_of(gb1[1]);
    out["b2a"] = tensor_of(gb2[0]);
    out["b2b"] = tensor_of(gb2[1]);
    return out;
  };
  CHECK(train::grad_check(nce_loss, nce_grad, ip, 1e-5).max_rel_err < 1e-4);
}
