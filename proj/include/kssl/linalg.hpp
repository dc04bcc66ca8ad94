#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "kssl/core.hpp"
#include "kssl/rng.hpp"

namespace kssl {

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and a deterministic sign gauge (largest-magnitude entry of
/// each eigenvector is positive; lowest index wins ties).
struct EigenSystem {
  Vec values;   // descending
  Mat vectors;  // columns aligned with values
};

inline void fix_sign(Eigen::Ref<Mat> vectors) {
  for (int j = 0; j < vectors.cols(); ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < vectors.rows(); ++i) {
      const double a = std::abs(vectors(i, j));
      if (a > best + 1e-14 * best) {
        best = a;
        arg = i;
      }
    }
    if (vectors(arg, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

inline EigenSystem sym_eig_desc(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw numeric_error("sym_eig_desc: eigensolver failed");
  const int n = static_cast<int>(a.rows());
  EigenSystem out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  fix_sign(out.vectors);
  (void)n;
  return out;
}

/// Spectral pieces of a PSD matrix with an eigenvalue floor: directions with
/// eigenvalue <= tol_rel * max are dropped from `kept`.
struct PsdSpectrum {
  Vec values;  // descending, full
  Mat vectors;
  int kept = 0;
  double tol = 0.0;

  Mat pinv() const {
    Mat p = Mat::Zero(vectors.rows(), vectors.rows());
    for (int i = 0; i < kept; ++i)
      p.noalias() += (1.0 / values[i]) * vectors.col(i) * vectors.col(i).transpose();
    return p;
  }

  Mat inv_sqrt() const {
    Mat p = Mat::Zero(vectors.rows(), vectors.rows());
    for (int i = 0; i < kept; ++i)
      p.noalias() += (1.0 / std::sqrt(values[i])) * vectors.col(i) * vectors.col(i).transpose();
    return p;
  }
};

inline PsdSpectrum psd_spectrum(const Mat& a, double tol_rel = 1e-10) {
  EigenSystem es = sym_eig_desc(a);
  PsdSpectrum s;
  s.values = es.values;
  s.vectors = es.vectors;
  const double top = s.values.size() ? std::max(s.values[0], 0.0) : 0.0;
  s.tol = tol_rel * top;
  int kept = 0;
  while (kept < s.values.size() && s.values[kept] > s.tol) ++kept;
  s.kept = kept;
  return s;
}

/// Eigenvalue-thresholded pseudo-inverse of a symmetric PSD matrix.
inline Mat pinv_psd(const Mat& a, double tol_rel = 1e-10) { return psd_spectrum(a, tol_rel).pinv(); }

inline double condition_number(const Vec& desc_values) {
  if (desc_values.size() == 0) return 0.0;
  const double lo = desc_values[desc_values.size() - 1];
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return desc_values[0] / lo;
}

/// Thin-Q orthonormalization of the columns of a.
inline Mat orthonormalize(const Mat& a) {
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
  return q;
}

inline Mat symmetrized(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline double max_abs(const Mat& a) { return a.cwiseAbs().maxCoeff(); }

/// Ordinary least squares slope of y against x.
inline std::pair<double, double> ols_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "ols_line: need >= 2 aligned points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  require(std::abs(denom) > 0, "ols_line: degenerate abscissae");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

}  // namespace kssl
