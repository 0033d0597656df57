#pragma once

// Shared numeric kernels: small dense linear algebra, complex DFT/FFT,
// counter-based seeded randomness, and finite-difference helpers.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace formsim {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kGravity = 9.81;              // m/s^2

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgumentError : SimError { using SimError::SimError; };
struct SingularMatrixError : SimError { using SimError::SimError; };
struct DegenerateGeometryError : SimError { using SimError::SimError; };
struct AmbiguityError : SimError { using SimError::SimError; };
struct UnobservableError : SimError { using SimError::SimError; };
struct NoPeakError : SimError { using SimError::SimError; };
struct NotReadyError : SimError { using SimError::SimError; };
struct DivergenceError : SimError { using SimError::SimError; };
struct ConfigError : SimError { using SimError::SimError; };

// ---------------------------------------------------------------------------
// 3-vectors
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  bool operator==(const Vec3&) const = default;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  double norm_sq() const { return dot(*this); }

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Scales v down to |v| = max_norm when it exceeds it; shorter vectors pass
// through unchanged.
inline Vec3 clip_norm(const Vec3& v, double max_norm) {
  double n = v.norm();
  if (n <= max_norm || n == 0.0) return v;
  return v * (max_norm / n);
}

// Outer product a b^T as a 3x3 array-of-rows.
struct Mat3 {
  double m[3][3] = {};

  static Mat3 identity() {
    Mat3 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }
  static Mat3 outer(const Vec3& a, const Vec3& b) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = a[i] * b[j];
    return r;
  }
  Vec3 mul(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
  // w^T M as a row vector.
  Vec3 mul_left(const Vec3& w) const {
    return {w.x * m[0][0] + w.y * m[1][0] + w.z * m[2][0],
            w.x * m[0][1] + w.y * m[1][1] + w.z * m[2][1],
            w.x * m[0][2] + w.y * m[1][2] + w.z * m[2][2]};
  }
  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
    return r;
  }
  Mat3 operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * s;
    return r;
  }
};

// ---------------------------------------------------------------------------
// Dense row-major matrix
// ---------------------------------------------------------------------------

class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(size_t(rows) * cols, 0.0) {
    if (rows <= 0 || cols <= 0) throw InvalidArgumentError("Mat: dimensions must be positive");
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return a_[size_t(r) * cols_ + c]; }
  double operator()(int r, int c) const { return a_[size_t(r) * cols_ + c]; }

  Mat transpose() const {
    Mat t(cols_, rows_);
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  Mat operator*(const Mat& o) const {
    if (cols_ != o.rows_) throw InvalidArgumentError("Mat: dimension mismatch in product");
    Mat p(rows_, o.cols_);
    for (int r = 0; r < rows_; ++r) {
      for (int k = 0; k < cols_; ++k) {
        double v = (*this)(r, k);
        if (v == 0.0) continue;
        for (int c = 0; c < o.cols_; ++c) p(r, c) += v * o(k, c);
      }
    }
    return p;
  }

  Mat operator+(const Mat& o) const {
    Mat s(rows_, cols_);
    for (size_t i = 0; i < a_.size(); ++i) s.a_[i] = a_[i] + o.a_[i];
    return s;
  }

  Mat operator*(double s) const {
    Mat m(rows_, cols_);
    for (size_t i = 0; i < a_.size(); ++i) m.a_[i] = a_[i] * s;
    return m;
  }

  std::vector<double> mul(std::span<const double> v) const {
    if (int(v.size()) != cols_) throw InvalidArgumentError("Mat: vector length mismatch");
    std::vector<double> r(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * v[j];
      r[i] = s;
    }
    return r;
  }

  double trace(int from = 0, int to = -1) const {
    if (to < 0) to = std::min(rows_, cols_);
    double t = 0.0;
    for (int i = from; i < to; ++i) t += (*this)(i, i);
    return t;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

// Lower Cholesky factor of a symmetric positive definite matrix. The input
// is Jacobi-equilibrated first so the pivot tolerance is relative per
// variable and mixed-unit systems factor reliably.
inline Mat cholesky(const Mat& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) throw InvalidArgumentError("cholesky: matrix not square");
  const int n = a.rows();
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) {
    const double d = a(i, i);
    if (!(d > 0.0) || !std::isfinite(d))
      throw SingularMatrixError("cholesky: matrix not positive definite");
    s[i] = 1.0 / std::sqrt(d);
  }
  Mat l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = 1.0;  // equilibrated diagonal
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) throw SingularMatrixError("cholesky: matrix not positive definite");
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double v = a(i, j) * s[i] * s[j];
      for (int k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  // Undo the equilibration: L_a = S^{-1} L_b.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) l(i, j) /= s[i];
  return l;
}

// Cholesky-like factor for positive *semi*definite matrices (process noise
// covariances may be singular). Columns with vanishing pivots are zeroed.
inline Mat cholesky_psd(const Mat& a, double tol = 1e-12) {
  const int n = a.rows();
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
  Mat l(n, n);
  if (scale == 0.0) return l;
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= tol * scale) continue;
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline std::vector<double> cholesky_solve(const Mat& l, std::span<const double> b) {
  const int n = l.rows();
  std::vector<double> y(n), x(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

// Solves a x = b for symmetric positive definite a.
inline std::vector<double> solve_spd(const Mat& a, std::span<const double> b) {
  if (a.rows() != int(b.size())) throw InvalidArgumentError("solve_spd: size mismatch");
  return cholesky_solve(cholesky(a), b);
}

inline Mat inverse_spd(const Mat& a) {
  const int n = a.rows();
  Mat l = cholesky(a);
  Mat inv(n, n);
  std::vector<double> e(n, 0.0);
  for (int c = 0; c < n; ++c) {
    e[c] = 1.0;
    auto col = cholesky_solve(l, e);
    for (int r = 0; r < n; ++r) inv(r, c) = col[r];
    e[c] = 0.0;
  }
  return inv;
}

// ---------------------------------------------------------------------------
// DFT
// ---------------------------------------------------------------------------

// Unscaled discrete Fourier transform. Forward kernel e^{-j2nkpi/N}, inverse
// kernel e^{+j2nkpi/N}; no 1/N factor is applied in either direction.
// Power-of-two lengths use an iterative radix-2 FFT, other lengths a direct
// evaluation.
inline std::vector<cplx> dft(std::span<const cplx> seq, bool inverse) {
  const size_t n = seq.size();
  if (n == 0) throw InvalidArgumentError("dft: empty sequence");
  std::vector<cplx> out(seq.begin(), seq.end());
  const double sign = inverse ? 1.0 : -1.0;
  if ((n & (n - 1)) == 0) {
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
      size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(out[i], out[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
      const double ang = sign * 2.0 * kPi / double(len);
      const cplx wl(std::cos(ang), std::sin(ang));
      for (size_t i = 0; i < n; i += len) {
        cplx w(1.0, 0.0);
        for (size_t k = 0; k < len / 2; ++k) {
          cplx u = out[i + k];
          cplx v = out[i + k + len / 2] * w;
          out[i + k] = u + v;
          out[i + k + len / 2] = u - v;
          w *= wl;
        }
      }
    }
    return out;
  }
  std::vector<cplx> direct(n);
  for (size_t k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (size_t m = 0; m < n; ++m) {
      double ang = sign * 2.0 * kPi * double(k) * double(m) / double(n);
      acc += out[m] * cplx(std::cos(ang), std::sin(ang));
    }
    direct[k] = acc;
  }
  return direct;
}

// ---------------------------------------------------------------------------
// Row pseudo-inverse (Moore-Penrose of a 1x3 Jacobian)
// ---------------------------------------------------------------------------

// j^T (j j^T)^{-1}; for a unit row this is just the transpose.
inline Vec3 pinv_row(const Vec3& j) {
  double n2 = j.norm_sq();
  if (n2 <= 0.0 || !std::isfinite(n2))
    throw DegenerateGeometryError("pinv_row: zero or non-finite row");
  return j / n2;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

template <class F>
std::vector<double> finite_diff_grad(F&& f, std::vector<double> x, double h) {
  if (h <= 0.0) throw InvalidArgumentError("finite_diff_grad: step must be positive");
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    double fp = f(std::span<const double>(x));
    x[i] = xi - h;
    double fm = f(std::span<const double>(x));
    x[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw InvalidArgumentError("finite_diff_grad: non-finite function value");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

// Counter-based generator: draw i of a stream keyed by (seed, substream name)
// is a pure function of (key, i). Enabling one consumer never perturbs the
// draws seen by another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  Rng substream(std::string_view name) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ull;
    }
    Rng r(0);
    r.key_ = mix(key_ ^ h);
    r.counter_ = 0;
    return r;
  }

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  // Uniform on [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // One Gaussian draw; sd = 0 returns the mean exactly without consuming state.
  double gauss(double mean, double sd) {
    if (sd < 0.0 || !std::isfinite(sd)) throw InvalidArgumentError("gauss: sd must be >= 0");
    if (sd == 0.0) return mean;
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = double(next_u64() >> 11) * 0x1.0p-53;        // [0, 1)
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InvalidArgumentError("Rng::below: empty range");
    return next_u64() % n;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace formsim
