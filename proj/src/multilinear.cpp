#include "hjb/multilinear.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>

namespace hjb {

namespace {

Eigen::Index powi(int base, int exp) {
  Eigen::Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

void checkFinite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

}  // namespace

SymTensor::SymTensor(int order, int dim)
    : order_(order), dim_(dim), symmetric_(true), entries_(Vector::Zero(powi(dim, order))) {
  if (order < 1 || dim < 1) throw std::invalid_argument("SymTensor: order and dim must be >= 1");
}

SymTensor::SymTensor(int order, int dim, Vector entries, bool symmetric)
    : order_(order), dim_(dim), symmetric_(symmetric), entries_(std::move(entries)) {}

SymTensor SymTensor::fromEntries(int order, int dim, Vector entries, bool symmetrize) {
  if (order < 1 || dim < 1) throw std::invalid_argument("SymTensor: order and dim must be >= 1");
  if (entries.size() != powi(dim, order))
    throw std::invalid_argument("SymTensor: entries size mismatch");
  checkFinite(entries, "SymTensor");
  SymTensor t(order, dim, std::move(entries), false);
  return symmetrize ? t.symmetrized() : t;
}

SymTensor SymTensor::fromMatrix(const Matrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("SymTensor::fromMatrix: not square");
  const Matrix S = 0.5 * (M + M.transpose());
  const int n = static_cast<int>(M.rows());
  Vector e(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) e[i * n + j] = S(i, j);
  return SymTensor(2, n, std::move(e), true);
}

double SymTensor::eval(std::span<const Vector> args) const {
  if (static_cast<int>(args.size()) != order_)
    throw std::invalid_argument("SymTensor::eval: argument count != order");
  for (const Vector& z : args)
    if (z.size() != dim_) throw std::invalid_argument("SymTensor::eval: dimension mismatch");
  // Contract the last slot repeatedly.
  Vector cur = entries_;
  for (int slot = order_ - 1; slot >= 1; --slot) {
    const Eigen::Index rows = cur.size() / dim_;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        cur.data(), rows, dim_);
    cur = m * args[slot];
  }
  return cur.dot(args[0]);
}

double SymTensor::eval(std::initializer_list<Vector> args) const {
  return eval(std::span<const Vector>(args.begin(), args.size()));
}

double SymTensor::evalDiagonal(const Vector& y) const {
  if (y.size() != dim_) throw std::invalid_argument("SymTensor::evalDiagonal: dimension mismatch");
  Vector cur = entries_;
  for (int slot = order_ - 1; slot >= 1; --slot) {
    const Eigen::Index rows = cur.size() / dim_;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        cur.data(), rows, dim_);
    cur = m * y;
  }
  return cur.dot(y);
}

double SymTensor::evalMixed(const Vector& v, const Vector& y) const {
  SymTensor s = contractLast(v);
  return order_ == 1 ? s.entries_[0] * 1.0 : s.evalDiagonal(y);
}

SymTensor SymTensor::contractLast(const Vector& v) const {
  if (v.size() != dim_) throw std::invalid_argument("SymTensor::contractLast: dimension mismatch");
  if (order_ == 1) {
    Vector e(1);
    e[0] = entries_.dot(v);
    return SymTensor(1, 1, std::move(e), true);  // degenerate scalar; callers use entries()[0]
  }
  const Eigen::Index rows = entries_.size() / dim_;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      entries_.data(), rows, dim_);
  return SymTensor(order_ - 1, dim_, m * v, symmetric_);
}

Vector SymTensor::diagonalGradient(const Vector& y) const {
  if (!symmetric_) throw std::logic_error("diagonalGradient requires a symmetric tensor");
  if (y.size() != dim_) throw std::invalid_argument("diagonalGradient: dimension mismatch");
  Vector cur = entries_;
  for (int slot = order_ - 1; slot >= 1; --slot) {
    const Eigen::Index rows = cur.size() / dim_;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        cur.data(), rows, dim_);
    cur = m * y;
  }
  return static_cast<double>(order_) * cur;
}

SymTensor SymTensor::symmetrized() const {
  const int k = order_;
  const int n = dim_;
  if (k == 1) return SymTensor(1, n, entries_, true);
  if (k > 6) throw std::invalid_argument("symmetrized: order > 6 not supported");

  // Pass 1: for every non-decreasing index tuple (the orbit representative)
  // average the entries over all distinct permutations. Pass 2: copy the
  // canonical value to every member of the orbit, so permutation invariance
  // is bit-exact.
  Vector canonical = Vector::Zero(entries_.size());
  std::array<int, 6> idx{};
  const Eigen::Index total = entries_.size();
  for (Eigen::Index flat = 0; flat < total; ++flat) {
    Eigen::Index rest = flat;
    for (int q = k - 1; q >= 0; --q) {
      idx[q] = static_cast<int>(rest % n);
      rest /= n;
    }
    bool sorted = true;
    for (int q = 0; q + 1 < k; ++q)
      if (idx[q] > idx[q + 1]) {
        sorted = false;
        break;
      }
    if (!sorted) continue;
    // Average over permutations of the representative tuple.
    std::array<int, 6> perm = idx;
    double sum = 0.0;
    long count = 0;
    do {
      Eigen::Index f = 0;
      for (int q = 0; q < k; ++q) f = f * n + perm[q];
      sum += entries_[f];
      ++count;
    } while (std::next_permutation(perm.begin(), perm.begin() + k));
    canonical[flat] = sum / static_cast<double>(count);
  }
  Vector out(total);
  for (Eigen::Index flat = 0; flat < total; ++flat) {
    std::array<int, 6> tup{};
    Eigen::Index rest = flat;
    for (int q = k - 1; q >= 0; --q) {
      tup[q] = static_cast<int>(rest % n);
      rest /= n;
    }
    std::sort(tup.begin(), tup.begin() + k);
    Eigen::Index f = 0;
    for (int q = 0; q < k; ++q) f = f * n + tup[q];
    out[flat] = canonical[f];
  }
  return SymTensor(k, n, std::move(out), true);
}

SymTensor& SymTensor::operator+=(const SymTensor& other) {
  if (order_ != other.order_ || dim_ != other.dim_)
    throw std::invalid_argument("SymTensor::operator+=: shape mismatch");
  entries_ += other.entries_;
  symmetric_ = symmetric_ && other.symmetric_;
  return *this;
}

SymTensor& SymTensor::operator*=(double s) {
  entries_ *= s;
  return *this;
}

SymTensor symPair(const SymTensor& t1, const SymTensor& t2) {
  if (t1.dim() != t2.dim()) throw std::invalid_argument("symPair: dimension mismatch");
  if (!t1.symmetric() || !t2.symmetric())
    throw std::invalid_argument("symPair: inputs must be symmetric");
  const int i = t1.order();
  const int j = t2.order();
  const int k = i + j;
  const int n = t1.dim();
  if (k > 6) throw std::invalid_argument("symPair: combined order > 6 not supported");

  // Enumerate the subsets of {0..k-1} of size i; each one is an
  // order-preserving interleaving.
  std::vector<uint32_t> subsets;
  for (uint32_t mask = 0; mask < (1u << k); ++mask)
    if (std::popcount(mask) == i) subsets.push_back(mask);

  Eigen::Index total = 1;
  for (int q = 0; q < k; ++q) total *= n;
  Vector out(total);
  std::array<int, 6> tup{};
  for (Eigen::Index flat = 0; flat < total; ++flat) {
    Eigen::Index rest = flat;
    for (int q = k - 1; q >= 0; --q) {
      tup[q] = static_cast<int>(rest % n);
      rest /= n;
    }
    double sum = 0.0;
    for (uint32_t mask : subsets) {
      Eigen::Index f1 = 0, f2 = 0;
      for (int q = 0; q < k; ++q) {
        if (mask & (1u << q))
          f1 = f1 * n + tup[q];
        else
          f2 = f2 * n + tup[q];
      }
      sum += t1.entries()[f1] * t2.entries()[f2];
    }
    out[flat] = sum / static_cast<double>(subsets.size());
  }
  // The average is symmetric in exact arithmetic; re-symmetrize so the
  // entry-level invariance is bit-exact.
  return SymTensor::fromEntries(k, n, std::move(out), true);
}

}  // namespace hjb
