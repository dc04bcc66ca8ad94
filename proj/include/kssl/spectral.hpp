#pragma once

#include <iostream>
#include <numeric>
#include <utility>

#include <json.hpp>

#include "kssl/dataset.hpp"
#include "kssl/kernels.hpp"
#include "kssl/linalg.hpp"

namespace kssl {

// ---------------------------------------------------------------------------
// Empirical operators
// ---------------------------------------------------------------------------

/// Block-averaging operator over same-input views: n blocks of (1/m) * ones.
/// An orthogonal projector onto functions constant on each input's views.
inline Mat build_T_hat(int n, int m) {
  require(n >= 1 && m >= 1, "build_T_hat: n, m must be >= 1");
  const long nm = static_cast<long>(n) * m;
  Mat t = Mat::Zero(nm, nm);
  const double w = 1.0 / m;
  for (int i = 0; i < n; ++i) t.block(static_cast<long>(i) * m, static_cast<long>(i) * m, m, m).setConstant(w);
  return t;
}

/// In-place y <- a*y + b*T_hat*y on a matrix of stacked view values.
inline void t_hat_axpy(int n, int m, double a, double b, Eigen::Ref<Mat> y) {
  for (int i = 0; i < n; ++i) {
    auto block = y.middleRows(static_cast<long>(i) * m, m);
    const Eigen::RowVectorXd mean = block.colwise().mean();
    block = a * block + b * mean.replicate(m, 1);
  }
}

/// Same for columns: y <- a*y + b*y*T_hat.
inline void t_hat_axpy_cols(int n, int m, double a, double b, Eigen::Ref<Mat> y) {
  for (int i = 0; i < n; ++i) {
    auto block = y.middleCols(static_cast<long>(i) * m, m);
    const Vec mean = block.rowwise().mean();
    block = a * block + b * mean.replicate(1, m);
  }
}

struct OperatorBundle {
  Mat T_hat;
  Mat K_hat;  // (1/nm) * kernel Gram over the views
  double beta = 1.0;
  double lambda = 0.0;
  double pinv_tol_rel = 1e-10;
  int n = 0, m = 0;
};

inline OperatorBundle make_bundle(const AugmentedDataset& data, const KernelSpec& spec, double beta,
                                  double lambda, double jitter = 0.0, double pinv_tol_rel = 1e-10) {
  data.validate();
  require(beta >= 0.0 && beta <= 1.0, "make_bundle: beta outside [0,1]");
  require(lambda >= 0.0, "make_bundle: lambda must be >= 0");
  OperatorBundle b;
  b.n = data.n;
  b.m = data.m;
  b.beta = beta;
  b.lambda = lambda;
  b.pinv_tol_rel = pinv_tol_rel;
  b.T_hat = build_T_hat(data.n, data.m);
  b.K_hat = gram(spec, data.views, jitter).entries / static_cast<double>(data.view_count());
  return b;
}

/// (1-beta) I + beta T_hat - lambda pinv(K_hat), symmetrized after assembly.
inline Mat build_T_lambda(const OperatorBundle& b) {
  const long nm = b.T_hat.rows();
  PsdSpectrum ks = psd_spectrum(b.K_hat, b.pinv_tol_rel);
  if (b.lambda > 0.0 && ks.kept == 0)
    throw numeric_error("build_T_lambda: K_hat entirely below the pseudo-inverse tolerance");
  Mat t = (1.0 - b.beta) * Mat::Identity(nm, nm) + b.beta * b.T_hat;
  if (b.lambda > 0.0) t.noalias() -= b.lambda * ks.pinv();
  return symmetrized(t);
}

// ---------------------------------------------------------------------------
// Representation models
// ---------------------------------------------------------------------------

enum class ScaleRule { SqrtClipped, Clipped };  // sqrt(max(l,0)) vs max(l,0)

inline double apply_scale_rule(ScaleRule r, double eigenvalue) {
  const double clipped = std::max(eigenvalue, 0.0);
  return r == ScaleRule::SqrtClipped ? std::sqrt(clipped) : clipped;
}

/// Pretrained kernel-expansion representation: component i evaluates as
/// psi_i(x) = s_i * sum_a k(x, anchor_a)/(nm) * alpha(a, i).
struct RepresentationModel {
  KernelSpec spec;
  Mat anchors;        // nm x dim (the views used for fitting)
  Mat alpha;          // nm x k
  Mat anchor_values;  // nm x k, column i = eigenvector v_i (norm sqrt(nm))
  Vec eigenvalues;    // k, descending
  Vec scales;         // k, apply_scale_rule(eigenvalues)
  ScaleRule scale_rule = ScaleRule::SqrtClipped;
  int n = 0, m = 0;
  bool padded = false;  // fewer distinct eigenpairs than k

  int k() const { return static_cast<int>(eigenvalues.size()); }

  Vec evaluate(const Eigen::Ref<const Vec>& x) const {
    require(x.size() == anchors.cols(), "evaluate: point has wrong dimension");
    const long nm = anchors.rows();
    Vec kx(nm);
    for (long a = 0; a < nm; ++a)
      kx[a] = eval_kernel(spec, x, anchors.row(a).transpose()) / static_cast<double>(nm);
    return (alpha.transpose() * kx).cwiseProduct(scales);
  }

  /// Representation of each row of `points`, one row per point.
  Mat evaluate_rows(const Mat& points) const {
    require(points.cols() == anchors.cols(), "evaluate_rows: wrong dimension");
    Mat kx = cross_gram(spec, points, anchors) / static_cast<double>(anchors.rows());
    Mat psi = kx * alpha;
    for (int i = 0; i < psi.cols(); ++i) psi.col(i) *= scales[i];
    return psi;
  }

  /// Representation at the anchor set (what the fit produced), nm x k.
  Mat anchor_psi() const {
    Mat psi = anchor_values;
    for (int i = 0; i < psi.cols(); ++i) psi.col(i) *= scales[i];
    return psi;
  }

  nlohmann::json to_json() const {
    auto mat_to_json = [](const Mat& m) {
      nlohmann::json rows = nlohmann::json::array();
      for (long i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
      }
      return rows;
    };
    nlohmann::json j;
    j["kernel"] = kernel_to_json(spec);
    j["n"] = n;
    j["m"] = m;
    j["scale_rule"] = scale_rule == ScaleRule::SqrtClipped ? "sqrt" : "linear";
    j["padded"] = padded;
    j["anchors"] = mat_to_json(anchors);
    j["alpha"] = mat_to_json(alpha);
    j["anchor_values"] = mat_to_json(anchor_values);
    j["eigenvalues"] = std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
    j["scales"] = std::vector<double>(scales.data(), scales.data() + scales.size());
    return j;
  }

  static RepresentationModel from_json(const nlohmann::json& j) {
    auto mat_from_json = [](const nlohmann::json& rows) {
      const long r = static_cast<long>(rows.size());
      const long c = r > 0 ? static_cast<long>(rows[0].size()) : 0;
      Mat m(r, c);
      for (long i = 0; i < r; ++i)
        for (long jj = 0; jj < c; ++jj) m(i, jj) = rows[i][jj].get<double>();
      return m;
    };
    RepresentationModel model;
    model.spec = kernel_from_json(j.at("kernel"));
    model.n = j.at("n").get<int>();
    model.m = j.at("m").get<int>();
    model.scale_rule = j.value("scale_rule", "sqrt") == std::string("sqrt") ? ScaleRule::SqrtClipped
                                                                            : ScaleRule::Clipped;
    model.padded = j.value("padded", false);
    model.anchors = mat_from_json(j.at("anchors"));
    model.alpha = mat_from_json(j.at("alpha"));
    model.anchor_values = mat_from_json(j.at("anchor_values"));
    const auto ev = j.at("eigenvalues").get<std::vector<double>>();
    const auto sc = j.at("scales").get<std::vector<double>>();
    model.eigenvalues = Eigen::Map<const Vec>(ev.data(), static_cast<long>(ev.size()));
    model.scales = Eigen::Map<const Vec>(sc.data(), static_cast<long>(sc.size()));
    return model;
  }
};

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitOptions {
  int k = 1;
  double beta = 1.0;
  double lambda = 0.0;
  ScaleRule scale_rule = ScaleRule::SqrtClipped;
  double pinv_tol_rel = 1e-10;
  double jitter = 0.0;     // absolute diagonal jitter on the view Gram
  int dense_limit = 1200;  // switch to shift-invert iteration above this size
  std::uint64_t iter_seed = 0x6b767353656564ull;
  int max_iterations = 120;
  double residual_tol = 1e-11;
  // Eigenvalues closer than this are treated as tied and their eigenspace is
  // re-based to its canonical earliest-support (reduced row echelon) basis,
  // the deterministic tie-break for degenerate spectra. 0 disables.
  double tie_tol = 0.0;
  bool quiet = false;
};

namespace detail {

struct EigPairs {
  Vec values;  // descending
  Mat vectors;  // columns, scaled to norm sqrt(nm)
  Mat alphas;   // pinv(K_hat) * vectors
};

inline void order_and_gauge(Vec& values, Mat& vectors, Mat& alphas) {
  const int k = static_cast<int>(values.size());
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  auto first_significant = [&](int j) {
    const double floor = 1e-12 * vectors.col(j).cwiseAbs().maxCoeff();
    for (int i = 0; i < vectors.rows(); ++i)
      if (std::abs(vectors(i, j)) > floor) return i;
    return 0;
  };
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return first_significant(a) < first_significant(b);
  });
  Vec v2(k);
  Mat m2(vectors.rows(), k), a2(alphas.rows(), k);
  for (int j = 0; j < k; ++j) {
    v2[j] = values[idx[j]];
    m2.col(j) = vectors.col(idx[j]);
    a2.col(j) = alphas.col(idx[j]);
  }
  for (int j = 0; j < k; ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < m2.rows(); ++i)
      if (std::abs(m2(i, j)) > best) {
        best = std::abs(m2(i, j));
        arg = i;
      }
    if (m2(arg, j) < 0.0) {
      m2.col(j) = -m2.col(j);
      a2.col(j) = -a2.col(j);
    }
  }
  values = std::move(v2);
  vectors = std::move(m2);
  alphas = std::move(a2);
}

/// Canonical earliest-support basis of the span of the orthonormal columns
/// of q: orthonormalized projections of the anchor indicators e_0, e_1, ...
/// onto the span, kept in anchor order. For a span of functions with
/// disjoint supports (the collapsed regime) this recovers exactly those
/// localized functions, and it never amplifies eigenvector noise.
inline Mat earliest_support_basis(const Mat& q) {
  const long n = q.rows();
  const long g = q.cols();
  Mat out(n, g);
  long placed = 0;
  for (long r = 0; r < n && placed < g; ++r) {
    Vec p = q * q.row(r).transpose();  // projection of e_r onto span(q)
    for (long j = 0; j < placed; ++j) p -= out.col(j).dot(p) * out.col(j);
    const double norm = p.norm();
    if (norm > 1e-6) {
      out.col(placed) = p / norm;
      ++placed;
    }
  }
  for (long r = 0; placed < g && r < n; ++r) {  // numerical stragglers
    Vec p = q * q.row(r).transpose();
    for (long j = 0; j < placed; ++j) p -= out.col(j).dot(p) * out.col(j);
    const double norm = p.norm();
    if (norm > 1e-12) {
      out.col(placed) = p / norm;
      ++placed;
    }
  }
  return out.leftCols(placed);
}

/// Dense path: eigenproblem of T_lambda restricted to the kept range of
/// K_hat (directions below the pseudo-inverse floor are outside the function
/// space and carry an infinite penalty, so they are excluded rather than
/// granted a free pass).
inline EigPairs dense_eigpairs(const Mat& k_hat, int n, int m, const FitOptions& opt) {
  const long nm = k_hat.rows();
  PsdSpectrum ks = psd_spectrum(k_hat, opt.pinv_tol_rel);
  if (ks.kept == 0) throw numeric_error("fit_representation: K_hat entirely below tolerance");
  const Mat u = ks.vectors.leftCols(ks.kept);
  Mat cu = u;
  t_hat_axpy(n, m, 1.0 - opt.beta, opt.beta, cu);  // C * U
  Mat small = symmetrized(u.transpose() * cu);
  if (opt.lambda > 0.0)
    for (int i = 0; i < ks.kept; ++i) small(i, i) -= opt.lambda / ks.values[i];
  EigenSystem es = sym_eig_desc(small);

  if (opt.tie_tol > 0.0) {
    // Re-base numerically tied eigenspaces onto their canonical
    // earliest-support basis in anchor coordinates.
    int g0 = 0;
    while (g0 < es.values.size()) {
      int g1 = g0 + 1;
      while (g1 < es.values.size() && es.values[g0] - es.values[g1] <= opt.tie_tol) ++g1;
      if (g1 - g0 > 1 && g0 < opt.k) {
        const Mat group_anchor = u * es.vectors.middleCols(g0, g1 - g0);
        const Mat rebased = earliest_support_basis(group_anchor);
        if (rebased.cols() == g1 - g0) {
          es.vectors.middleCols(g0, g1 - g0) = u.transpose() * rebased;
          for (int j = g0; j < g1; ++j) {
            const Vec c = es.vectors.col(j);
            es.values[j] = c.dot(small * c) / c.squaredNorm();
            es.vectors.col(j) = c / c.norm();
          }
        }
      }
      g0 = g1;
    }
  }

  const int take = std::min<int>(opt.k, ks.kept);
  EigPairs out;
  out.values = es.values.head(take);
  const Mat c = es.vectors.leftCols(take);
  const double root_nm = std::sqrt(static_cast<double>(nm));
  out.vectors = root_nm * (u * c);
  Mat dc = c;
  for (int i = 0; i < ks.kept; ++i) dc.row(i) /= ks.values[i];
  out.alphas = root_nm * (u * dc);
  return out;
}

/// Large-N path for lambda > 0: shift-invert subspace iteration on
/// W = (mu0 I - T_lambda)^{-1} = A^{-1/2} [I - lambda (M + lambda I)^{-1}] A^{-1/2}
/// with A = mu0 I - C (closed-form square roots since T_hat is a projector)
/// and M = A^{1/2} K_hat A^{1/2}. One Cholesky factorization total.
inline EigPairs iterative_eigpairs(Mat k_hat, int n, int m, const FitOptions& opt) {
  require(opt.lambda > 0.0, "fit_representation: iterative path requires lambda > 0");
  const long nm = k_hat.rows();
  const double mu0 = 1.0 + 1e-6;
  const double a_ker = mu0 - 1.0 + opt.beta;  // eigenvalue of A off the T_hat range
  const double a_rng = mu0 - 1.0;             // eigenvalue of A on the T_hat range
  const double s_ker = std::sqrt(a_ker), s_rng = std::sqrt(a_rng);

  // M = A^{1/2} K A^{1/2} built in place.
  t_hat_axpy(n, m, s_ker, s_rng - s_ker, k_hat);
  t_hat_axpy_cols(n, m, s_ker, s_rng - s_ker, k_hat);
  k_hat = symmetrized(k_hat);
  k_hat.diagonal().array() += opt.lambda;
  Eigen::LLT<Eigen::Ref<Mat>> llt(k_hat);  // in place
  if (llt.info() != Eigen::Success)
    throw numeric_error("fit_representation: Cholesky of M + lambda I failed");

  const auto apply_w = [&](const Mat& q) {
    Mat y = q;
    t_hat_axpy(n, m, 1.0 / s_ker, 1.0 / s_rng - 1.0 / s_ker, y);
    Mat z = y - opt.lambda * llt.solve(y);
    t_hat_axpy(n, m, 1.0 / s_ker, 1.0 / s_rng - 1.0 / s_ker, z);
    return z;
  };

  const int p = std::min<long>(nm, opt.k + 8);
  Rng rng(opt.iter_seed);
  Mat q = orthonormalize(rng.normal_mat(nm, p));
  Vec theta = Vec::Zero(p);
  Mat wq;
  for (int it = 0; it < opt.max_iterations; ++it) {
    wq = apply_w(q);
    Mat g = symmetrized(q.transpose() * wq);
    EigenSystem es = sym_eig_desc(g);
    theta = es.values;
    q = orthonormalize(wq * es.vectors);
    wq = apply_w(q);
    Mat ritz = symmetrized(q.transpose() * wq);
    EigenSystem rs = sym_eig_desc(ritz);
    theta = rs.values;
    q = q * rs.vectors;
    wq = wq * rs.vectors;
    double worst = 0.0;
    for (int j = 0; j < std::min<int>(opt.k, p); ++j)
      worst = std::max(worst, (wq.col(j) - theta[j] * q.col(j)).norm());
    if (worst <= opt.residual_tol * std::max(theta[0], 1e-300)) break;
  }

  const int take = std::min<int>(opt.k, p);
  EigPairs out;
  out.values = Vec(take);
  out.vectors = Mat(nm, take);
  out.alphas = Mat(nm, take);
  const double root_nm = std::sqrt(static_cast<double>(nm));
  for (int j = 0; j < take; ++j) {
    const double mu = theta[j] > 0.0 ? mu0 - 1.0 / theta[j] : -std::numeric_limits<double>::infinity();
    out.values[j] = mu;
    out.vectors.col(j) = root_nm * q.col(j);
    // K^{-1} v from the eigen relation: lambda K^{-1} v = C v - mu v.
    Mat cv = out.vectors.col(j);
    t_hat_axpy(n, m, 1.0 - opt.beta, opt.beta, cv);
    out.alphas.col(j) = (cv - mu * out.vectors.col(j)) / opt.lambda;
  }
  return out;
}

}  // namespace detail

inline RepresentationModel fit_representation(const AugmentedDataset& data, const KernelSpec& spec,
                                              const FitOptions& opt) {
  data.validate();
  require(opt.k >= 1, "fit_representation: k must be >= 1");
  require(opt.k <= data.view_count(), "fit_representation: k exceeds nm");
  require(opt.beta >= 0.0 && opt.beta <= 1.0, "fit_representation: beta outside [0,1]");
  require(opt.lambda >= 0.0, "fit_representation: lambda must be >= 0");
  const long nm = data.view_count();
  Mat k_hat = gram(spec, data.views, opt.jitter).entries / static_cast<double>(nm);

  detail::EigPairs pairs = (nm <= opt.dense_limit || opt.lambda == 0.0)
                               ? detail::dense_eigpairs(k_hat, data.n, data.m, opt)
                               : detail::iterative_eigpairs(std::move(k_hat), data.n, data.m, opt);
  detail::order_and_gauge(pairs.values, pairs.vectors, pairs.alphas);

  RepresentationModel model;
  model.spec = spec;
  model.anchors = data.views;
  model.n = data.n;
  model.m = data.m;
  model.scale_rule = opt.scale_rule;
  const int got = static_cast<int>(pairs.values.size());
  model.eigenvalues = Vec::Zero(opt.k);
  model.scales = Vec::Zero(opt.k);
  model.alpha = Mat::Zero(nm, opt.k);
  model.anchor_values = Mat::Zero(nm, opt.k);
  model.eigenvalues.head(got) = pairs.values;
  model.alpha.leftCols(got) = pairs.alphas;
  model.anchor_values.leftCols(got) = pairs.vectors;
  for (int i = 0; i < opt.k; ++i) model.scales[i] = apply_scale_rule(opt.scale_rule, model.eigenvalues[i]);
  if (got < opt.k) {
    model.padded = true;
    if (!opt.quiet)
      std::cerr << "fit_representation: only " << got << " eigenpairs available, padding to k="
                << opt.k << " with zero components\n";
  }
  return model;
}

// ---------------------------------------------------------------------------
// Empirical loss
// ---------------------------------------------------------------------------

/// Unbiased empirical pretraining loss of representation values at the view
/// grid: 2(beta-1) mean ||psi||^2 - 2 beta (same-parent ordered pairs, j != j')
/// + mean over all ordered pairs of (psi' . psi)^2 + k.
inline double empirical_loss(const Mat& psi_values, int n, int m, double beta) {
  require(beta >= 0.0 && beta <= 1.0, "empirical_loss: beta outside [0,1]");
  require(psi_values.rows() == static_cast<long>(n) * m, "empirical_loss: layout not rectangular");
  if (m == 1 && beta > 0.0)
    throw input_error("empirical_loss: no invariance pairs with m = 1 and beta > 0");
  const long nm = psi_values.rows();
  const int k = static_cast<int>(psi_values.cols());
  const double sq_norm_mean = psi_values.squaredNorm() / static_cast<double>(nm);

  double invariance = 0.0;
  if (m >= 2 && beta > 0.0) {
    for (int i = 0; i < n; ++i) {
      const auto block = psi_values.middleRows(static_cast<long>(i) * m, m);
      const Eigen::RowVectorXd s = block.colwise().sum();
      invariance += s.squaredNorm() - block.squaredNorm();
    }
    invariance /= static_cast<double>(n) * m * (m - 1);
  }

  const Mat g = psi_values.transpose() * psi_values / static_cast<double>(nm);
  const double quad = g.squaredNorm();
  return 2.0 * (beta - 1.0) * sq_norm_mean - 2.0 * beta * invariance + quad + k;
}

}  // namespace kssl
