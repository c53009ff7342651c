#pragma once

/// \file
/// Complex matrix-valued differential forms on a 4-dimensional chart.
///
/// A form of grade p stores one jet coefficient per ordered multi-index
/// dx^{i1}^...^dx^{ip} (i1 < ... < ip), for every matrix entry. Multi-indices
/// are bitmasks over the four axes; within a grade they are kept in
/// lexicographic order of their sorted index tuples.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdm/jet.hpp"

namespace mdm {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DepthExhausted : std::logic_error {
  using std::logic_error::logic_error;
};

namespace basis {

constexpr int binomial(int n, int k) noexcept {
  if (k < 0 || k > n) return 0;
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct Table {
  std::array<std::array<unsigned, 6>, 5> masks{};
  std::array<int, 16> index{};  // position of a mask within its grade
};

constexpr Table make_table() {
  Table t{};
  // enumerate combinations lexicographically by sorted tuple
  std::array<int, 5> fill{};
  for (unsigned m = 0; m < 16; ++m) t.index[m] = -1;
  t.masks[0][fill[0]++] = 0u;
  t.masks[4][fill[4]++] = 0xFu;
  for (int a = 0; a < 4; ++a) t.masks[1][fill[1]++] = 1u << a;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) t.masks[2][fill[2]++] = (1u << a) | (1u << b);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      for (int c = b + 1; c < 4; ++c) t.masks[3][fill[3]++] = (1u << a) | (1u << b) | (1u << c);
  for (int g = 0; g <= 4; ++g)
    for (int k = 0; k < binomial(4, g); ++k) t.index[t.masks[g][k]] = k;
  return t;
}

inline constexpr Table kTable = make_table();

constexpr int size(int grade) noexcept { return (grade < 0 || grade > 4) ? 0 : binomial(4, grade); }
constexpr unsigned mask(int grade, int k) noexcept { return kTable.masks[grade][k]; }
constexpr int index_of(unsigned m) noexcept { return kTable.index[m]; }

/// Sign of e^A ^ e^B relative to e^{A|B}; zero when the masks overlap.
constexpr int wedge_sign(unsigned a, unsigned b) noexcept {
  if (a & b) return 0;
  int swaps = 0;
  for (int i = 0; i < 4; ++i) {
    if (!(a & (1u << i))) continue;
    for (int j = 0; j < i; ++j)
      if (b & (1u << j)) ++swaps;
  }
  return (swaps % 2) ? -1 : 1;
}

/// Sorted axis list of a mask.
inline std::vector<int> axes(unsigned m) {
  std::vector<int> out;
  for (int i = 0; i < 4; ++i)
    if (m & (1u << i)) out.push_back(i);
  return out;
}

}  // namespace basis

/// rows x cols matrix of complex p-forms with second-order jet coefficients.
/// `depth` counts how many jet orders remain trustworthy (2, 1 or 0).
class MatrixForm {
 public:
  MatrixForm() = default;
  MatrixForm(int rows, int cols, int grade, int depth = 2)
      : rows_(rows), cols_(cols), grade_(grade), depth_(depth),
        nb_(basis::size(grade)), data_(static_cast<std::size_t>(rows * cols * nb_)) {
    if (rows <= 0 || cols <= 0) throw ShapeError("MatrixForm: non-positive dimension");
    if (grade < 0) throw ShapeError("MatrixForm: negative grade");
  }

  static MatrixForm zero(int rows, int cols, int grade, int depth = 2) {
    return MatrixForm(rows, cols, grade, depth);
  }

  /// 1x1 zero-form.
  static MatrixForm function(const Jet& f, int depth = 2) {
    MatrixForm r(1, 1, 0, depth);
    r(0, 0, 0) = f;
    return r;
  }

  static MatrixForm constant(cplx c) { return function(Jet(c)); }

  /// n x n constant matrix (grade 0).
  static MatrixForm constant_matrix(int rows, int cols, const std::vector<cplx>& entries) {
    MatrixForm r(rows, cols, 0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) r(i, j, 0) = Jet(entries[static_cast<std::size_t>(i * cols + j)]);
    return r;
  }

  static MatrixForm identity(int n) {
    MatrixForm r(n, n, 0);
    for (int i = 0; i < n; ++i) r(i, i, 0) = Jet(1.0);
    return r;
  }

  /// The 1x1 one-form dx^axis.
  static MatrixForm dx(int axis) {
    MatrixForm r(1, 1, 1);
    r(0, 0, basis::index_of(1u << axis)) = Jet(1.0);
    return r;
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int grade() const noexcept { return grade_; }
  int depth() const noexcept { return depth_; }
  int basis_size() const noexcept { return nb_; }
  bool is_zero_grade() const noexcept { return nb_ == 0; }

  Jet& operator()(int r, int c, int k) { return data_[offset(r, c, k)]; }
  const Jet& operator()(int r, int c, int k) const { return data_[offset(r, c, k)]; }

  /// Coefficient on basis element `m` (bitmask of axes).
  Jet& at_mask(int r, int c, unsigned m) { return (*this)(r, c, basis::index_of(m)); }
  const Jet& at_mask(int r, int c, unsigned m) const { return (*this)(r, c, basis::index_of(m)); }

  MatrixForm entry(int r, int c) const { return block(r, c, 1, 1); }

  MatrixForm block(int r0, int c0, int nr, int nc) const {
    if (r0 < 0 || c0 < 0 || r0 + nr > rows_ || c0 + nc > cols_) throw ShapeError("MatrixForm::block out of range");
    MatrixForm out(nr, nc, grade_, depth_);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j)
        for (int k = 0; k < nb_; ++k) out(i, j, k) = (*this)(r0 + i, c0 + j, k);
    return out;
  }

  void set_block(int r0, int c0, const MatrixForm& b) {
    if (b.grade_ != grade_) throw ShapeError("MatrixForm::set_block grade mismatch");
    if (r0 < 0 || c0 < 0 || r0 + b.rows_ > rows_ || c0 + b.cols_ > cols_)
      throw ShapeError("MatrixForm::set_block out of range");
    for (int i = 0; i < b.rows_; ++i)
      for (int j = 0; j < b.cols_; ++j)
        for (int k = 0; k < nb_; ++k) (*this)(r0 + i, c0 + j, k) = b(i, j, k);
    depth_ = std::min(depth_, b.depth_);
  }

  MatrixForm with_depth(int d) const {
    MatrixForm r = *this;
    r.depth_ = std::min(depth_, d);
    return r;
  }

  MatrixForm& operator+=(const MatrixForm& o) {
    check_same(o, "+");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    depth_ = std::min(depth_, o.depth_);
    return *this;
  }
  MatrixForm& operator-=(const MatrixForm& o) {
    check_same(o, "-");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    depth_ = std::min(depth_, o.depth_);
    return *this;
  }
  MatrixForm& operator*=(cplx s) {
    for (auto& j : data_) j *= s;
    return *this;
  }

  friend MatrixForm operator+(MatrixForm a, const MatrixForm& b) { return a += b; }
  friend MatrixForm operator-(MatrixForm a, const MatrixForm& b) { return a -= b; }
  friend MatrixForm operator-(MatrixForm a) { return a *= cplx(-1.0); }
  friend MatrixForm operator*(MatrixForm a, cplx s) { return a *= s; }
  friend MatrixForm operator*(cplx s, MatrixForm a) { return a *= s; }
  friend MatrixForm operator*(MatrixForm a, double s) { return a *= cplx(s); }
  friend MatrixForm operator*(double s, MatrixForm a) { return a *= cplx(s); }

  /// Largest |coefficient value| over entries and basis elements.
  double max_norm() const {
    double m = 0.0;
    for (const auto& j : data_) m = std::max(m, std::abs(j.value));
    return m;
  }

  /// Largest |imaginary part| of coefficient values.
  double max_imag() const {
    double m = 0.0;
    for (const auto& j : data_) m = std::max(m, std::abs(j.value.imag()));
    return m;
  }

  /// Coefficient value of a 1x1 top form on dx^1^dx^2^dx^3^dx^4.
  cplx top_coefficient() const {
    if (grade_ != 4 || rows_ != 1 || cols_ != 1) throw ShapeError("top_coefficient needs a 1x1 four-form");
    return (*this)(0, 0, 0).value;
  }

  const std::vector<Jet>& coefficients() const noexcept { return data_; }
  std::vector<Jet>& coefficients() noexcept { return data_; }

 private:
  std::size_t offset(int r, int c, int k) const {
    return static_cast<std::size_t>((r * cols_ + c) * nb_ + k);
  }
  void check_same(const MatrixForm& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_ || grade_ != o.grade_)
      throw ShapeError(std::string("MatrixForm operator") + op + ": shape or grade mismatch (" +
                       std::to_string(rows_) + "x" + std::to_string(cols_) + " grade " + std::to_string(grade_) +
                       " vs " + std::to_string(o.rows_) + "x" + std::to_string(o.cols_) + " grade " +
                       std::to_string(o.grade_) + ")");
  }

  int rows_ = 1;
  int cols_ = 1;
  int grade_ = 0;
  int depth_ = 2;
  int nb_ = 1;
  std::vector<Jet> data_ = std::vector<Jet>(1);
};

namespace detail {

inline void wedge_accumulate(const MatrixForm& a, int ar, int ac, const MatrixForm& b, int br, int bc,
                             MatrixForm& out, int orow, int ocol) {
  for (int i = 0; i < a.basis_size(); ++i) {
    const unsigned ma = basis::mask(a.grade(), i);
    for (int j = 0; j < b.basis_size(); ++j) {
      const unsigned mb = basis::mask(b.grade(), j);
      const int s = basis::wedge_sign(ma, mb);
      if (s == 0) continue;
      Jet term = a(ar, ac, i) * b(br, bc, j);
      if (s < 0) term = -term;
      out.at_mask(orow, ocol, ma | mb) += term;
    }
  }
}

}  // namespace detail

/// Matrix product whose scalar multiplication is the wedge of entry forms.
/// A 1x1 operand acts as a scalar form on every entry of the other operand.
inline MatrixForm wedge(const MatrixForm& a, const MatrixForm& b) {
  const int grade = a.grade() + b.grade();
  const int depth = std::min(a.depth(), b.depth());
  if (a.cols() == b.rows()) {
    MatrixForm out(a.rows(), b.cols(), grade, depth);
    if (out.is_zero_grade()) return out;
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < b.cols(); ++c)
        for (int k = 0; k < a.cols(); ++k) detail::wedge_accumulate(a, r, k, b, k, c, out, r, c);
    return out;
  }
  if (a.rows() == 1 && a.cols() == 1) {
    MatrixForm out(b.rows(), b.cols(), grade, depth);
    if (out.is_zero_grade()) return out;
    for (int r = 0; r < b.rows(); ++r)
      for (int c = 0; c < b.cols(); ++c) detail::wedge_accumulate(a, 0, 0, b, r, c, out, r, c);
    return out;
  }
  if (b.rows() == 1 && b.cols() == 1) {
    MatrixForm out(a.rows(), a.cols(), grade, depth);
    if (out.is_zero_grade()) return out;
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c) detail::wedge_accumulate(a, r, c, b, 0, 0, out, r, c);
    return out;
  }
  throw ShapeError("wedge: cannot multiply " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " by " +
                   std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

template <typename... Rest>
MatrixForm wedge(const MatrixForm& a, const MatrixForm& b, const MatrixForm& c, const Rest&... rest) {
  return wedge(wedge(a, b), c, rest...);
}

/// Entrywise exterior derivative; consumes one jet order.
inline MatrixForm exterior_d(const MatrixForm& a) {
  if (a.depth() < 1) throw DepthExhausted("exterior_d: jet depth exhausted");
  MatrixForm out(a.rows(), a.cols(), a.grade() + 1, a.depth() - 1);
  if (out.is_zero_grade()) return out;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      for (int k = 0; k < a.basis_size(); ++k) {
        const unsigned m = basis::mask(a.grade(), k);
        for (int axis = 0; axis < kDim; ++axis) {
          const unsigned dm = 1u << axis;
          const int s = basis::wedge_sign(dm, m);
          if (s == 0) continue;
          Jet term = partial(a(r, c, k), axis);
          if (s < 0) term = -term;
          out.at_mask(r, c, dm | m) += term;
        }
      }
    }
  }
  return out;
}

/// Entrywise complex conjugate.
inline MatrixForm conj(const MatrixForm& a) {
  MatrixForm out = a;
  for (auto& j : out.coefficients()) j = conj(j);
  return out;
}

inline MatrixForm transpose(const MatrixForm& a) {
  MatrixForm out(a.cols(), a.rows(), a.grade(), a.depth());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      for (int k = 0; k < a.basis_size(); ++k) out(c, r, k) = a(r, c, k);
  return out;
}

/// Conjugate transpose with no grade-dependent sign.
inline MatrixForm dagger(const MatrixForm& a) { return conj(transpose(a)); }

inline MatrixForm trace(const MatrixForm& a) {
  if (a.rows() != a.cols()) throw ShapeError("trace: matrix is not square");
  MatrixForm out(1, 1, a.grade(), a.depth());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.basis_size(); ++k) out(0, 0, k) += a(i, i, k);
  return out;
}

inline MatrixForm real_part(const MatrixForm& a) { return (a + conj(a)) * 0.5; }
inline MatrixForm imag_part(const MatrixForm& a) { return (a - conj(a)) * cplx(0.0, -0.5); }

/// The n x n matrix form with the scalar form `f` on the diagonal.
inline MatrixForm times_identity(const MatrixForm& f, int n) {
  if (f.rows() != 1 || f.cols() != 1) throw ShapeError("times_identity: expected a 1x1 form");
  MatrixForm out(n, n, f.grade(), f.depth());
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < f.basis_size(); ++k) out(i, i, k) = f(0, 0, k);
  return out;
}

/// Graded commutator A^B - (-1)^{pq} B^A.
inline MatrixForm graded_commutator(const MatrixForm& a, const MatrixForm& b) {
  const bool odd = (a.grade() * b.grade()) % 2 == 1;
  return odd ? wedge(a, b) + wedge(b, a) : wedge(a, b) - wedge(b, a);
}

/// Stacks equally sized blocks into a matrix form; rows of `blocks` are block rows.
inline MatrixForm assemble(const std::vector<std::vector<MatrixForm>>& blocks) {
  int rows = 0;
  int cols = 0;
  for (const auto& b : blocks) rows += b.front().rows();
  for (const auto& b : blocks.front()) cols += b.cols();
  const int grade = blocks.front().front().grade();
  int depth = 2;
  for (const auto& row : blocks)
    for (const auto& b : row) depth = std::min(depth, b.depth());
  MatrixForm out(rows, cols, grade, depth);
  int r0 = 0;
  for (const auto& row : blocks) {
    int c0 = 0;
    for (const auto& b : row) {
      out.set_block(r0, c0, b);
      c0 += b.cols();
    }
    r0 += row.front().rows();
  }
  return out;
}

}  // namespace mdm
