#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hjb/types.hpp"

namespace hjb {

// Dense symmetric multilinear form of order k over R^n.
//
// Entries are stored row-major (last index fastest):
//   idx(i_1,...,i_k) = ((i_1*n + i_2)*n + ...)*n + i_k.
// A tensor flagged symmetric has entries that are bit-exactly invariant
// under every index permutation (the symmetrization pass writes the same
// canonical value to every position in an orbit).
class SymTensor {
 public:
  SymTensor(int order, int dim);  // zero tensor, flagged symmetric

  // Takes ownership of raw entries (size must be dim^order). When
  // `symmetrize` is set, the entries are averaged over all permutations.
  static SymTensor fromEntries(int order, int dim, Vector entries, bool symmetrize);
  static SymTensor fromMatrix(const Matrix& M);  // order-2, symmetrized

  int order() const { return order_; }
  int dim() const { return dim_; }
  bool symmetric() const { return symmetric_; }
  const Vector& entries() const { return entries_; }
  Eigen::Index size() const { return entries_.size(); }

  // Full contraction T(z_1,...,z_k).
  double eval(std::span<const Vector> args) const;
  double eval(std::initializer_list<Vector> args) const;
  // Diagonal evaluation T(y,...,y).
  double evalDiagonal(const Vector& y) const;
  // T(v, y, ..., y) with k-1 copies of y (requires symmetry for the
  // leading-slot interpretation).
  double evalMixed(const Vector& v, const Vector& y) const;

  // S(z_1,...,z_{k-1}) = T(z_1,...,z_{k-1},v). Preserves symmetry.
  SymTensor contractLast(const Vector& v) const;

  // Gradient of y -> T(y,...,y): the vector g with g.z = k*T(y,...,y,z).
  Vector diagonalGradient(const Vector& y) const;

  // Exact symmetrization: averages over all k! permutations, writing the
  // canonical value to every entry of a permutation orbit.
  SymTensor symmetrized() const;

  // Entrywise l1 norm; a certified upper bound on the operator norm.
  double l1Norm() const { return entries_.lpNorm<1>(); }
  double maxAbs() const { return entries_.lpNorm<Eigen::Infinity>(); }

  SymTensor& operator+=(const SymTensor& other);
  SymTensor& operator*=(double s);
  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator*(double s, SymTensor t) { return t *= s; }

 private:
  SymTensor(int order, int dim, Vector entries, bool symmetric);

  int order_;
  int dim_;
  bool symmetric_;
  Vector entries_;
};

// Sym_{i,j}(T1 (x) T2): average of T1(z_{sigma(1..i)}) * T2(z_{sigma(i+1..i+j)})
// over the binom(i+j,i) order-preserving interleavings. Result is symmetric
// when both inputs are.
SymTensor symPair(const SymTensor& t1, const SymTensor& t2);

// Replaces slot `mode` by M: out(z_1,...,z_k) = T(z_1,...,M z_mode,...,z_k),
// i.e. out_{..m..} = sum_j in_{..j..} M(j,m). Shared by the Lyapunov solver
// (complex eigenbasis transforms) and the G_i assembly.
template <class Scalar>
Eigen::VectorX<Scalar> modeMultiply(const Eigen::VectorX<Scalar>& entries, int order, int dim,
                                    int mode, const Eigen::MatrixX<Scalar>& M) {
  if (mode < 0 || mode >= order) throw std::invalid_argument("modeMultiply: bad mode");
  if (M.rows() != dim || M.cols() != dim) throw std::invalid_argument("modeMultiply: bad matrix");
  Eigen::Index inner = 1;
  for (int q = mode + 1; q < order; ++q) inner *= dim;
  Eigen::Index outer = entries.size() / (inner * dim);
  Eigen::VectorX<Scalar> out(entries.size());
  for (Eigen::Index o = 0; o < outer; ++o) {
    const Eigen::Index base = o * dim * inner;
    for (Eigen::Index in = 0; in < inner; ++in) {
      for (int m = 0; m < dim; ++m) {
        Scalar acc{};
        for (int j = 0; j < dim; ++j) acc += entries[base + j * inner + in] * M(j, m);
        out[base + m * inner + in] = acc;
      }
    }
  }
  return out;
}

}  // namespace hjb
