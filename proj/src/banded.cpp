#include "lnn/banded.hpp"

#include "lnn/eldyn.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace lnn {

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

// LU with partial pivoting of a matrix with lower and upper bandwidth 2.
// Row r stores columns [r - 2, r + 4]; pivoting grows the upper band to 4.
class BandLU {
 public:
  static constexpr int kl = 2;
  static constexpr int ku = 2;
  static constexpr int width = 2 * kl + ku + 1;

  explicit BandLU(int n) : n_(n), a_(Mat::Zero(n, width)), piv_(n) {}

  double& operator()(int r, int c) { return a_(r, c - r + kl); }
  double operator()(int r, int c) const { return a_(r, c - r + kl); }

  // False if a pivot falls below tol.
  bool factor(double tol) {
    for (int k = 0; k < n_; ++k) {
      const int last = std::min(n_ - 1, k + kl);
      int p = k;
      for (int r = k + 1; r <= last; ++r)
        if (std::abs((*this)(r, k)) > std::abs((*this)(p, k))) p = r;
      piv_[k] = p;
      if (!(std::abs((*this)(p, k)) > tol)) return false;
      const int cmax = std::min(n_ - 1, k + ku + kl);
      if (p != k)
        for (int c = k; c <= cmax; ++c) std::swap((*this)(k, c), (*this)(p, c));
      const double pivot = (*this)(k, k);
      for (int r = k + 1; r <= last; ++r) {
        const double l = (*this)(r, k) / pivot;
        (*this)(r, k) = l;
        if (l == 0.0) continue;
        for (int c = k + 1; c <= cmax; ++c) (*this)(r, c) -= l * (*this)(k, c);
      }
    }
    return true;
  }

  Vec solve(Vec b) const {
    for (int k = 0; k < n_; ++k) {
      if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
      const int last = std::min(n_ - 1, k + kl);
      for (int r = k + 1; r <= last; ++r) b[r] -= (*this)(r, k) * b[k];
    }
    for (int k = n_ - 1; k >= 0; --k) {
      double acc = b[k];
      const int cmax = std::min(n_ - 1, k + ku + kl);
      for (int c = k + 1; c <= cmax; ++c) acc -= (*this)(k, c) * b[c];
      b[k] = acc / (*this)(k, k);
    }
    return b;
  }

 private:
  int n_;
  Mat a_;
  std::vector<int> piv_;
};

std::optional<Vec> woodbury_solve(const CyclicPentadiagonal& a, const Vec& b, double rcond) {
  const int n = a.size();
  BandLU lu(n);
  double scale = 0.0;
  // Corner entries wrap around; everything else is the plain band.
  std::array<int, 4> corner_rows{0, 1, n - 2, n - 1};
  Mat v = Mat::Zero(n, 4);
  for (int i = 0; i < n; ++i) {
    for (int k = -2; k <= 2; ++k) {
      const double x = a.at(i, k);
      scale = std::max(scale, std::abs(x));
      const int j = i + k;
      if (j >= 0 && j < n) {
        lu(i, j) += x;
      } else {
        int slot = i < 2 ? i : i - (n - 2) + 2;
        v(wrap(j, n), slot) += x;
      }
    }
  }
  if (scale == 0.0) return std::nullopt;
  if (!lu.factor(rcond * scale)) return std::nullopt;

  const Vec y = lu.solve(b);
  Mat z(n, 4);
  for (int s = 0; s < 4; ++s) {
    Vec e = Vec::Zero(n);
    e[corner_rows[s]] = 1.0;
    z.col(s) = lu.solve(e);
  }
  // A = B + U V^T with U = [e_0, e_1, e_{n-2}, e_{n-1}].
  const Mat cap = Mat::Identity(4, 4) + v.transpose() * z;
  Eigen::JacobiSVD<Mat> svd(cap, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  if (!(sv[3] > rcond * sv[0])) return std::nullopt;
  Vec x = y - z * svd.solve(v.transpose() * y);
  if (!x.allFinite()) return std::nullopt;
  // Guard against an ill-conditioned band factorization.
  const double bnorm = b.lpNorm<Eigen::Infinity>();
  const double resid = (a.multiply(x) - b).lpNorm<Eigen::Infinity>();
  if (resid > 1e-8 * std::max(bnorm, scale * x.lpNorm<Eigen::Infinity>())) return std::nullopt;
  return x;
}

}  // namespace

CyclicPentadiagonal::CyclicPentadiagonal(int n) : n_(n), band_(Mat::Zero(n, 5)) {
  if (n < 3) throw InvalidArgument("CyclicPentadiagonal: need at least 3 rows");
}

Mat CyclicPentadiagonal::to_dense() const {
  Mat d = Mat::Zero(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int k = -2; k <= 2; ++k) d(i, wrap(i + k, n_)) += at(i, k);
  return d;
}

Vec CyclicPentadiagonal::multiply(const Vec& x) const {
  if (x.size() != n_) throw InvalidArgument("CyclicPentadiagonal::multiply: size mismatch");
  Vec y = Vec::Zero(n_);
  for (int i = 0; i < n_; ++i)
    for (int k = -2; k <= 2; ++k) y[i] += at(i, k) * x[wrap(i + k, n_)];
  return y;
}

bool CyclicPentadiagonal::is_symmetric() const {
  for (int i = 0; i < n_; ++i)
    for (int k = -2; k <= 2; ++k)
      if (at(i, k) != at(wrap(i + k, n_), -k)) return false;
  return true;
}

BandedSolve solve_cyclic_pentadiagonal(const CyclicPentadiagonal& a, const Vec& b, double rcond, int dense_below) {
  if (b.size() != a.size()) throw InvalidArgument("solve_cyclic_pentadiagonal: size mismatch");
  BandedSolve out;
  if (a.size() >= std::max(dense_below, 5)) {
    if (auto x = woodbury_solve(a, b, rcond)) {
      out.x = std::move(*x);
      return out;
    }
  }
  out.dense_fallback = true;
  out.x = pinv_solve(a.to_dense(), b, rcond).x;
  return out;
}

}  // namespace lnn
