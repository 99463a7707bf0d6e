#include "homog/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "homog/errors.hpp"

namespace homog {

Mat::Mat(int rows, int cols, std::initializer_list<double> entries) : Mat(rows, cols) {
  if (static_cast<size_t>(rows) * cols != entries.size())
    throw DimensionMismatch("Mat: initializer size does not match rows*cols");
  std::copy(entries.begin(), entries.end(), a_.begin());
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat& Mat::operator+=(const Mat& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionMismatch("Mat::operator+= shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Mat& Mat::operator-=(const Mat& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionMismatch("Mat::operator-= shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Mat& Mat::operator*=(double c) {
  for (double& x : a_) x *= c;
  return *this;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul shape mismatch");
  Mat c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vec matvec(const Mat& a, const Vec& x) {
  if (a.cols() != static_cast<int>(x.size())) throw DimensionMismatch("matvec shape mismatch");
  Vec y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

Mat outer(const Vec& u, const Vec& v) {
  Mat m(static_cast<int>(u.size()), static_cast<int>(v.size()));
  for (size_t i = 0; i < u.size(); ++i)
    for (size_t j = 0; j < v.size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = u[i] * v[j];
  return m;
}

Mat symmetric_part(const Mat& m) {
  Mat s(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

Mat antisymmetric_part(const Mat& m) {
  Mat s(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) - m(j, i));
  return s;
}

double max_abs(const Mat& m) {
  double r = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r = std::max(r, std::fabs(m(i, j)));
  return r;
}

double frobenius_norm(const Mat& m) {
  double r = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r += m(i, j) * m(i, j);
  return std::sqrt(r);
}

double norm2(const Vec& v) {
  double r = 0.0;
  for (double x : v) r += x * x;
  return std::sqrt(r);
}

SymEig sym_eig(const Mat& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("sym_eig: matrix not square");
  const int n = m.rows();
  Mat a = symmetric_part(m);
  Mat v = Mat::identity(n);

  // Cyclic Jacobi. Matrices here are tiny (n <= ~8), convergence is fast.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = 0.5 * (a(q, q) - a(p, p)) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymEig out;
  out.values.resize(n);
  for (int i = 0; i < n; ++i) out.values[i] = a(i, i);
  out.vectors = v;
  return out;
}

Mat psd_clip(const Mat& m, double* clip) {
  SymEig e = sym_eig(m);
  const int n = m.rows();
  double clipped = 0.0;
  for (double& lam : e.values) {
    if (lam < 0.0) {
      clipped = std::max(clipped, -lam);
      lam = 0.0;
    }
  }
  if (clip) *clip = clipped;
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      out(i, j) = s;
    }
  // enforce exact symmetry of the reconstruction
  return symmetric_part(out);
}

Mat psd_sqrt(const Mat& m, double* clip) {
  SymEig e = sym_eig(m);
  const int n = m.rows();
  double clipped = 0.0;
  for (double& lam : e.values) {
    if (lam < 0.0) {
      clipped = std::max(clipped, -lam);
      lam = 0.0;
    }
    lam = std::sqrt(lam);
  }
  if (clip) *clip = clipped;
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      out(i, j) = s;
    }
  return out;
}

}  // namespace homog
