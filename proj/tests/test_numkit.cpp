#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "warp/errors.hpp"
#include "warp/numkit/eigh.hpp"
#include "warp/numkit/fft.hpp"
#include "warp/numkit/matrix.hpp"
#include "warp/numkit/rng.hpp"

using namespace warp;
using namespace warp::numkit;

TEST_CASE("matvec examples") {
  CHECK(matvec(Matrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  CHECK(matvec(Matrix{{1, 2}, {3, 4}}, Vector{1, 1}) == Vector{3, 7});
  CHECK(matvec(Matrix(2, 2), Vector{5, 5}) == Vector{0, 0});
  CHECK_THROWS_AS(matvec(Matrix(2, 3), Vector{1, 2}), ContractViolation);
}

TEST_CASE("matvec with a basis vector returns the column") {
  RngStream rng(3, 1);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix m(8, 8);
    for (double& v : m.flat()) v = rng.uniform(-1, 1);
    for (std::size_t j = 0; j < 8; ++j) {
      Vector e(8, 0.0);
      e[j] = 1.0;
      CHECK(matvec(m, e) == m.col(j));
    }
  }
}

TEST_CASE("gemm honours transposes") {
  Matrix a{{1, 2, 3}, {4, 5, 6}};
  Matrix b{{1, 0}, {0, 1}, {1, 1}};
  CHECK(matmul(a, b) == Matrix{{4, 5}, {10, 11}});
  Matrix c(3, 3);
  gemm(1.0, a, true, a, false, 0.0, c);
  CHECK(c == Matrix{{17, 22, 27}, {22, 29, 36}, {27, 36, 45}});
  Matrix d(2, 2, 1.0);
  gemm(2.0, b, true, b, false, 1.0, d);
  CHECK(d == Matrix{{5, 3}, {3, 5}});
}

TEST_CASE("fft_causal_conv examples") {
  const Vector sig{0.3, -1.5, 2.25};
  CHECK(fft_causal_conv(Vector{1.0}, sig)[0] == doctest::Approx(0.3));
  CHECK(fft_causal_conv(Vector{1.0}, sig)[2] == doctest::Approx(2.25));
  const Vector out = fft_causal_conv(Vector{1, 1}, Vector{1, 2, 3});
  REQUIRE(out.size() == 3);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(3.0));
  CHECK(out[2] == doctest::Approx(5.0));
  for (double v : fft_causal_conv(Vector{0, 0}, Vector{4, -2, 7, 1})) CHECK(v == 0.0);
}

TEST_CASE("fft_causal_conv matches direct summation") {
  RngStream rng(11, 2);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t tk = 1 + rng.below(128), ts = 1 + rng.below(128);
    Vector k(tk), s(ts);
    for (double& v : k) v = rng.uniform(-1, 1);
    for (double& v : s) v = rng.uniform(-1, 1);
    const Vector out = fft_causal_conv(k, s);
    REQUIRE(out.size() == ts);
    double scale = 0.0;
    Vector ref(ts, 0.0);
    for (std::size_t t = 0; t < ts; ++t) {
      for (std::size_t l = 0; l <= t && l < tk; ++l) ref[t] += k[l] * s[t - l];
      scale = std::max(scale, std::abs(ref[t]));
    }
    for (std::size_t t = 0; t < ts; ++t) worst = std::max(worst, std::abs(out[t] - ref[t]) / std::max(scale, 1e-300));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("next_pow2") {
  CHECK(next_pow2(1) == 1);
  CHECK(next_pow2(5) == 8);
  CHECK(next_pow2(64) == 64);
}

TEST_CASE("randn") {
  RngStream a(42, 7), b(42, 7);
  CHECK(randn(a, 0).empty());
  CHECK(randn(a, 100) == randn(b, 100));
  RngStream big(1, 0);
  const Vector v = randn(big, 1000000);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("RngStream draws are addressed by counter") {
  RngStream a(5, 9);
  a.uniform();
  a.uniform();
  const std::uint64_t c = a.counter();
  const double x = a.uniform();
  RngStream b(5, 9);
  b.seek(c);
  CHECK(b.uniform() == x);
  CHECK(RngStream(5, 9).next_u64() != RngStream(5, 10).next_u64());
  CHECK(RngStream(5, 9).next_u64() != RngStream(6, 9).next_u64());
}

TEST_CASE("RngStream golden values are stable across processes") {
  RngStream r(2024, 3);
  const std::uint64_t first = r.next_u64();
  RngStream again(2024, 3);
  CHECK(again.next_u64() == first);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t n = 1 + static_cast<std::uint64_t>(i);
    CHECK(r.below(n) < n);
  }
}

TEST_CASE("symmetric_eigh_topk examples") {
  Matrix d{{3, 0}, {0, 1}};
  auto e = symmetric_eigh_topk(d, 2);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));

  const Vector u{0.6, 0.0, 0.8};
  Matrix r1(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) r1(i, j) = u[i] * u[j];
  auto e1 = symmetric_eigh_topk(r1, 1);
  CHECK(e1.values[0] == doctest::Approx(1.0));
  const double sign = e1.vectors(0, 0) > 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < 3; ++i) CHECK(sign * e1.vectors(i, 0) == doctest::Approx(u[i]));

  auto ei = symmetric_eigh_topk(Matrix::identity(4), 1);
  CHECK(ei.values[0] == doctest::Approx(1.0));
  CHECK(norm(ei.vectors) == doctest::Approx(1.0));

  CHECK_THROWS_AS(symmetric_eigh_topk(Matrix{{1, 2}, {0, 1}}, 1), ContractViolation);
  CHECK_THROWS_AS(symmetric_eigh_topk(Matrix::identity(2), 3), ContractViolation);
}

TEST_CASE("symmetric_eigh_topk residuals on random matrices") {
  RngStream rng(8, 8);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 2 + rng.below(12);
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-1, 1);
    const std::size_t k = 1 + rng.below(n);
    auto e = symmetric_eigh_topk(m, k);
    for (std::size_t c = 0; c + 1 < k; ++c) CHECK(e.values[c] >= e.values[c + 1]);
    for (std::size_t c = 0; c < k; ++c) {
      Vector v = e.vectors.col(c);
      Vector mv = matvec(m, v);
      double res = 0.0;
      for (std::size_t i = 0; i < n; ++i) res += std::pow(mv[i] - e.values[c] * v[i], 2);
      CHECK(std::sqrt(res) <= 1e-8 * norm(m));
    }
  }
}
