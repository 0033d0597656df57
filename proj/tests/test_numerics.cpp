#include <catch2/catch_amalgamated.hpp>

#include "formsim/numerics.hpp"

using namespace formsim;

namespace {

// Independent O(N^2) DFT oracle.
std::vector<cplx> direct_dft(std::span<const cplx> x, bool inverse) {
  const size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> out(n);
  for (size_t k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (size_t m = 0; m < n; ++m)
      acc += x[m] * std::polar(1.0, sign * 2.0 * kPi * double(k * m % n) / double(n));
    out[k] = acc;
  }
  return out;
}

// Independent Gauss-Jordan elimination oracle with partial pivoting.
std::vector<double> eliminate(Mat a, std::vector<double> b) {
  const int n = a.rows();
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
      std::swap(b[col], b[piv]);
    }
    const double d = a(col, col);
    for (int c = 0; c < n; ++c) a(col, c) /= d;
    b[col] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  return b;
}

Mat random_spd(Rng& rng, int n) {
  Mat g(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) g(r, c) = rng.uniform(-1.0, 1.0);
  Mat a = g.transpose() * g;
  for (int i = 0; i < n; ++i) a(i, i) += 0.5;
  return a;
}

}  // namespace

TEST_CASE("dft impulse and constant duality") {
  std::vector<cplx> impulse(8, {0.0, 0.0});
  impulse[0] = {1.0, 0.0};
  auto spec = dft(impulse, false);
  for (const cplx& v : spec) CHECK(std::abs(v - cplx(1.0, 0.0)) < 1e-12);

  std::vector<cplx> ones(8, {1.0, 0.0});
  auto imp = dft(ones, false);
  CHECK(std::abs(imp[0] - cplx(8.0, 0.0)) < 1e-12);
  for (size_t i = 1; i < imp.size(); ++i) CHECK(std::abs(imp[i]) < 1e-12);
}

TEST_CASE("dft matches the direct oracle and satisfies Parseval") {
  Rng rng(42);
  for (size_t n : {3u, 8u, 40u, 64u, 128u}) {
    std::vector<cplx> x(n);
    for (cplx& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    auto fast = dft(x, false);
    auto slow = direct_dft(x, false);
    double in_energy = 0.0, out_energy = 0.0;
    for (size_t i = 0; i < n; ++i) {
      CHECK(std::abs(fast[i] - slow[i]) < 1e-9 * (1.0 + std::abs(slow[i])));
      in_energy += std::norm(x[i]);
      out_energy += std::norm(fast[i]);
    }
    CHECK(out_energy == Catch::Approx(double(n) * in_energy).epsilon(1e-10));
  }
}

TEST_CASE("dft round trip up to length 4096") {
  Rng rng(7);
  for (size_t n : {1u, 2u, 5u, 256u, 4096u}) {
    std::vector<cplx> x(n);
    for (cplx& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    auto back = dft(dft(x, false), true);
    for (size_t i = 0; i < n; ++i)
      CHECK(std::abs(back[i] / double(n) - x[i]) < 1e-9 * (1.0 + std::abs(x[i])));
  }
}

TEST_CASE("dft rejects an empty sequence") {
  CHECK_THROWS_AS(dft(std::vector<cplx>{}, false), InvalidArgumentError);
}

TEST_CASE("solve_spd identity and diagonal cases") {
  Mat eye = Mat::identity(3);
  std::vector<double> b{1.0, -2.0, 3.0};
  auto x = solve_spd(eye, b);
  CHECK(x == b);

  Mat d(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  auto y = solve_spd(d, std::vector<double>{2.0, 4.0});
  CHECK(y[0] == Catch::Approx(1.0));
  CHECK(y[1] == Catch::Approx(1.0));
}

TEST_CASE("solve_spd matches the elimination oracle on random systems") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Mat a = random_spd(rng, 8);
    std::vector<double> b(8);
    for (double& v : b) v = rng.uniform(-2.0, 2.0);
    auto x = solve_spd(a, b);
    auto ref = eliminate(a, b);
    double bnorm = 0.0, rnorm = 0.0;
    auto ax = a.mul(x);
    for (int i = 0; i < 8; ++i) {
      CHECK(x[i] == Catch::Approx(ref[i]).margin(1e-9));
      bnorm += b[i] * b[i];
      rnorm += (ax[i] - b[i]) * (ax[i] - b[i]);
    }
    CHECK(std::sqrt(rnorm) <= 1e-9 * std::sqrt(bnorm));
  }
}

TEST_CASE("solve_spd rejects singular and indefinite inputs") {
  Mat zero(3, 3);
  CHECK_THROWS_AS(solve_spd(zero, std::vector<double>{1, 1, 1}), SingularMatrixError);
  Mat indef = Mat::identity(2);
  indef(1, 1) = -1.0;
  CHECK_THROWS_AS(solve_spd(indef, std::vector<double>{1, 1}), SingularMatrixError);
}

TEST_CASE("pinv_row on axis rows and random unit rows") {
  Vec3 ex = pinv_row({1.0, 0.0, 0.0});
  CHECK(ex.x == 1.0);
  CHECK(ex.y == 0.0);

  Vec3 ey = pinv_row({0.0, 2.0, 0.0});
  CHECK(ey.y == Catch::Approx(0.5));
  CHECK(Vec3{0.0, 2.0, 0.0}.dot(ey) == Catch::Approx(1.0));

  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    Vec3 j{rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1)};
    j = j / j.norm();
    Vec3 p = pinv_row(j);
    CHECK((p - j).norm() < 1e-12);
    // p j^T is the rank-1 projector onto span(j): idempotent.
    Mat3 proj = Mat3::outer(p, j);
    Mat3 proj2;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += proj.m[r][k] * proj.m[k][c];
        proj2.m[r][c] = s;
      }
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) CHECK(std::abs(proj2.m[r][c] - proj.m[r][c]) < 1e-12);
  }

  CHECK_THROWS_AS(pinv_row({0.0, 0.0, 0.0}), DegenerateGeometryError);
}

TEST_CASE("finite_diff_grad on smooth fields") {
  auto norm_sq = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  auto g = finite_diff_grad(norm_sq, {1.0, 2.0}, 1e-5);
  CHECK(g[0] == Catch::Approx(2.0).margin(1e-6));
  CHECK(g[1] == Catch::Approx(4.0).margin(1e-6));

  auto constant = [](std::span<const double>) { return 4.5; };
  auto gz = finite_diff_grad(constant, {0.3, -0.7, 2.0}, 1e-5);
  for (double v : gz) CHECK(v == 0.0);
}

TEST_CASE("gauss draws: exact mean at sd zero, moments, determinism") {
  Rng rng(123);
  CHECK(rng.gauss(3.0, 0.0) == 3.0);
  CHECK_THROWS_AS(rng.gauss(0.0, -1.0), InvalidArgumentError);

  Rng moments(2024);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = moments.gauss(0.0, 1.0);
    sum += v;
    sum_sq += v * v;
  }
  double mean = sum / n;
  double sd = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sd - 1.0) < 0.02);

  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.gauss(0.0, 1.0) == b.gauss(0.0, 1.0));
}

TEST_CASE("rng substreams are independent of consumption order") {
  Rng root(5);
  Rng noise = root.substream("noise");
  Rng training = root.substream("training");
  double first_training = training.uniform();

  Rng root2(5);
  Rng noise2 = root2.substream("noise");
  for (int i = 0; i < 50; ++i) noise2.uniform();  // extra consumption elsewhere
  Rng training2 = root2.substream("training");
  CHECK(training2.uniform() == first_training);
  (void)noise;
}
