#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "semcom/error.hpp"
#include "semcom/retrieval.hpp"
#include "semcom/rng.hpp"

using namespace semcom;
using namespace semcom::retrieval;

TEST_CASE("ranking examples") {
  const GalleryIndex g(Tensor::matrix(2, 2, {0, 0, 1, 1}), {1, 2});
  const std::vector<double> q{0.1, 0};
  CHECK(rank_query(q, g) == std::vector<std::size_t>{0, 1});
  CHECK(g.label(nearest(q, g)) == 1);
  const std::vector<double> exact{1, 1};
  CHECK(nearest(exact, g) == 1);
  CHECK(squared_distance(exact, g.feature(1)) == 0.0);

  // equal distances resolve to the lower index
  const GalleryIndex tie(Tensor::matrix(3, 1, {2, -2, 2}), {7, 8, 9});
  const std::vector<double> zero{0};
  CHECK(rank_query(zero, tie) == std::vector<std::size_t>{0, 1, 2});
  CHECK(nearest(zero, tie) == 0);
}

TEST_CASE("top-1 accuracy examples") {
  const Tensor feats = Tensor::matrix(3, 2, {0, 0, 5, 5, -3, 4});
  const GalleryIndex g(feats, {0, 1, 2});
  CHECK(top1_accuracy(feats, {0, 1, 2}, g) == 1.0);
  CHECK(top1_accuracy(feats, {1, 2, 0}, g) == 0.0);
  CHECK(top1_accuracy(Tensor::matrix(2, 2, {0.1, 0, 4.9, 5}), {0, 2}, g) == 0.5);
}

TEST_CASE("brute-force oracle") {
  Rng rng(21);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng.below(30), w = 1 + rng.below(8);
    Tensor feats({n, w});
    std::vector<int> labels(n);
    for (double& x : feats.values) x = std::round(rng.normal() * 4) / 4;  // coarse grid forces ties
    for (int& l : labels) l = static_cast<int>(rng.below(5));
    const GalleryIndex g(feats, labels);
    std::vector<double> q(w);
    for (double& x : q) x = std::round(rng.normal() * 4) / 4;

    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0;
      for (std::size_t j = 0; j < w; ++j) d += (q[j] - feats.at(i, j)) * (q[j] - feats.at(i, j));
      all.emplace_back(d, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect;
    for (const auto& [d, i] : all) expect.push_back(i);
    CHECK(rank_query(q, g) == expect);
    CHECK(nearest(q, g) == expect.front());
    const int label = static_cast<int>(rng.below(5));
    CHECK(top1_hit(q, label, g) == (labels[expect.front()] == label));
  }
}

TEST_CASE("rigid rotation leaves accuracy unchanged") {
  Rng rng(5);
  const std::size_t n = 40, w = 6, nq = 25;
  Tensor gal({n, w}), qs({nq, w});
  std::vector<int> gl(n), ql(nq);
  for (double& x : gal.values) x = rng.normal();
  for (double& x : qs.values) x = rng.normal();
  for (int& l : gl) l = static_cast<int>(rng.below(6));
  for (int& l : ql) l = static_cast<int>(rng.below(6));
  // random orthogonal matrix by Gram-Schmidt, plus a translation
  std::vector<std::vector<double>> basis;
  while (basis.size() < w) {
    std::vector<double> v(w);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      const double dot = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (std::size_t j = 0; j < w; ++j) v[j] -= dot * b[j];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
    basis.push_back(v);
  }
  const auto rotate = [&](const Tensor& t) {
    Tensor out(t.shape);
    for (std::size_t i = 0; i < t.rows(); ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double s = 0.7 * j;
        for (std::size_t k = 0; k < w; ++k) s += basis[j][k] * t.at(i, k);
        out.at(i, j) = s;
      }
    }
    return out;
  };
  const double before = top1_accuracy(qs, ql, GalleryIndex(gal, gl));
  const double after = top1_accuracy(rotate(qs), ql, GalleryIndex(rotate(gal), gl));
  CHECK(before == after);
  CHECK(before > 0.0);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(GalleryIndex(Tensor({0, 3}), {}), ValidationError);
  CHECK_THROWS_AS(GalleryIndex(Tensor::matrix(2, 1, {0, 1}), {1}), ShapeError);
  const GalleryIndex g(Tensor::matrix(2, 2, {0, 0, 1, 1}), {1, 2});
  const std::vector<double> q{0, 0, 0};
  CHECK_THROWS_AS(rank_query(q, g), ShapeError);
  CHECK_THROWS_AS(nearest(q, g), ShapeError);
  CHECK_THROWS_AS(top1_accuracy(Tensor({0, 2}), {}, g), ValidationError);
}
