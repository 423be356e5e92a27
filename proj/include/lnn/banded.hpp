#pragma once

#include "lnn/types.hpp"

namespace lnn {

// n x n matrix with nonzeros only at cyclic offsets -2..2: entry (i, (i + k) mod n)
// for k in [-2, 2]. For n < 5 several offsets alias the same dense entry; the
// stored contributions are then summed by to_dense and multiply.
class CyclicPentadiagonal {
 public:
  explicit CyclicPentadiagonal(int n);

  int size() const { return n_; }
  double& at(int row, int offset) { return band_(row, offset + 2); }
  double at(int row, int offset) const { return band_(row, offset + 2); }

  Mat to_dense() const;
  Vec multiply(const Vec& x) const;
  // band(i, k) == band(i + k, -k) bit for bit.
  bool is_symmetric() const;

 private:
  int n_;
  Mat band_;  // n x 5, column k + 2 holds offset k
};

struct BandedSolve {
  Vec x;
  bool dense_fallback = false;
};

// Solves A x = b in O(n): LU with partial pivoting of the non-cyclic band,
// then a Woodbury correction for the four corner rows. Falls back to the dense
// pseudoinverse (rcond relative cutoff) below dense_below unknowns, or when the
// band or the corner capacitance system is numerically singular.
BandedSolve solve_cyclic_pentadiagonal(const CyclicPentadiagonal& a, const Vec& b, double rcond,
                                       int dense_below = 16);

}  // namespace lnn
