#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace homog {

using Vec = std::vector<double>;

// Small dense row-major matrix. Dimensions here are the noise dimension e
// and the slow dimension d, both single digits in every built-in system,
// so no attempt is made at being clever.
class Mat {
public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {}
  Mat(int rows, int cols, std::initializer_list<double> entries);

  static Mat identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return a_.empty(); }

  double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  Mat& operator+=(const Mat& o);
  Mat& operator-=(const Mat& o);
  Mat& operator*=(double c);

  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, double c) { return a *= c; }
  friend Mat operator*(double c, Mat a) { return a *= c; }

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

Mat transpose(const Mat& m);
Mat matmul(const Mat& a, const Mat& b);
Vec matvec(const Mat& a, const Vec& x);
Mat outer(const Vec& u, const Vec& v);

// 0.5*(m + m^T) and 0.5*(m - m^T).
Mat symmetric_part(const Mat& m);
Mat antisymmetric_part(const Mat& m);

double max_abs(const Mat& m);
double frobenius_norm(const Mat& m);
double norm2(const Vec& v);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// eigenvectors are returned as columns of `vectors`.
struct SymEig {
  Vec values;
  Mat vectors;
};
SymEig sym_eig(const Mat& m);

// Project a (nearly) symmetric matrix onto the PSD cone: symmetrize, clip
// negative eigenvalues to zero. `clip` receives the largest magnitude
// clipped, 0 when the input was already PSD.
Mat psd_clip(const Mat& m, double* clip = nullptr);

// Symmetric PSD square root factor A with A*A^T = psd_clip(m).
Mat psd_sqrt(const Mat& m, double* clip = nullptr);

}  // namespace homog
