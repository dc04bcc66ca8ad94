#pragma once

#include <vector>

#include "kssl/dataset.hpp"
#include "kssl/kernels.hpp"
#include "kssl/linalg.hpp"
#include "kssl/rng.hpp"

namespace kssl {

// ---------------------------------------------------------------------------
// PSD parameter (Lambda = Theta^T Theta in the explicit feature space)
// ---------------------------------------------------------------------------

struct PsdParam {
  Mat lambda_mat;  // D x D symmetric PSD
  double hs_cap = std::numeric_limits<double>::infinity();  // k / lambda

  double hs_norm() const { return lambda_mat.norm(); }
};

/// Project onto the feasible set: eigenvalues clipped at zero, then the
/// Hilbert-Schmidt norm rescaled onto the cap. Idempotent.
inline PsdParam project_feasible(const PsdParam& param) {
  PsdParam out = param;
  EigenSystem es = sym_eig_desc(param.lambda_mat);
  Mat clipped = Mat::Zero(param.lambda_mat.rows(), param.lambda_mat.cols());
  for (int i = 0; i < es.values.size(); ++i)
    if (es.values[i] > 0.0)
      clipped.noalias() += es.values[i] * es.vectors.col(i) * es.vectors.col(i).transpose();
  const double hs = clipped.norm();
  if (hs > param.hs_cap) clipped *= param.hs_cap / hs;
  out.lambda_mat = symmetrized(clipped);
  return out;
}

/// Keep the top-k eigenpairs, zero the rest.
inline PsdParam threshold_rank(const PsdParam& param, int k) {
  require(k >= 1, "threshold_rank: k must be >= 1");
  PsdParam out = param;
  EigenSystem es = sym_eig_desc(param.lambda_mat);
  Mat kept = Mat::Zero(param.lambda_mat.rows(), param.lambda_mat.cols());
  for (int i = 0; i < std::min<int>(k, static_cast<int>(es.values.size())); ++i)
    if (es.values[i] > 0.0)
      kept.noalias() += es.values[i] * es.vectors.col(i) * es.vectors.col(i).transpose();
  out.lambda_mat = symmetrized(kept);
  return out;
}

/// Eigenfactor Theta (k x D) with Lambda ~= Theta^T Theta restricted to the
/// top-k eigenpairs; the induced representation is psi(x) = Theta phi(x).
inline Mat theta_factor(const PsdParam& param, int k) {
  EigenSystem es = sym_eig_desc(param.lambda_mat);
  Mat theta = Mat::Zero(k, param.lambda_mat.cols());
  for (int i = 0; i < std::min<int>(k, static_cast<int>(es.values.size())); ++i)
    if (es.values[i] > 0.0) theta.row(i) = std::sqrt(es.values[i]) * es.vectors.col(i).transpose();
  return theta;
}

// ---------------------------------------------------------------------------
// Minibatch sampling
// ---------------------------------------------------------------------------

/// Two distinct inputs, m view rows each (global row indices into the view
/// grid). Views are drawn without replacement when m <= views available;
/// resampling (with replacement) must be requested explicitly otherwise.
struct Minibatch {
  int input_a = 0, input_b = 0;
  std::vector<int> rows_a, rows_b;
};

inline Minibatch sample_minibatch(int n, int m_dataset, int m_batch, Rng& rng,
                                  bool with_replacement = false) {
  require(n >= 2, "sample_minibatch: need at least 2 inputs");
  require(m_batch >= 1, "sample_minibatch: m must be >= 1");
  if (m_batch > m_dataset && !with_replacement)
    throw input_error("sample_minibatch: m exceeds available views and resampling is disabled");
  Minibatch b;
  b.input_a = rng.below_int(n);
  b.input_b = rng.below_int(n - 1);
  if (b.input_b >= b.input_a) ++b.input_b;
  auto draw = [&](int input) {
    std::vector<int> rows;
    if (with_replacement) {
      rows.resize(m_batch);
      for (int j = 0; j < m_batch; ++j) rows[j] = input * m_dataset + rng.below_int(m_dataset);
    } else {
      rows = rng.sample_without_replacement(m_dataset, m_batch);
      for (int& r : rows) r += input * m_dataset;
    }
    return rows;
  };
  b.rows_a = draw(b.input_a);
  b.rows_b = draw(b.input_b);
  return b;
}

// ---------------------------------------------------------------------------
// Stochastic gradient
// ---------------------------------------------------------------------------

/// Unbiased stochastic gradient of the empirical regularized loss at Lambda.
/// Invariance and variance terms follow the two-input minibatch form
/// (ordered same-input pairs j != k at weight 2 beta / (m (m-1)), variance at
/// 2 (beta - 1) / m); the quadratic term mixes cross-input blocks at weight
/// (n-1)/n with a within-input estimate at weight 1/n so its expectation is
/// exactly the all-pairs mean of the empirical loss under
/// distinct-inputs-without-replacement sampling.
inline Mat stochastic_gradient(const Mat& features, int n, int m_dataset, const Minibatch& batch,
                               const Mat& lambda_mat, double beta, double lambda_reg) {
  require(beta >= 0.0 && beta <= 1.0, "stochastic_gradient: beta outside [0,1]");
  const int m = static_cast<int>(batch.rows_a.size());
  require(m >= 2 && static_cast<int>(batch.rows_b.size()) == m,
          "stochastic_gradient: need m >= 2 views per input");
  const int dim = static_cast<int>(features.cols());
  Mat b(2 * m, dim);
  for (int j = 0; j < m; ++j) {
    b.row(j) = features.row(batch.rows_a[j]);
    b.row(m + j) = features.row(batch.rows_b[j]);
  }
  const Mat c = b * lambda_mat * b.transpose();  // <Lambda, phi_a phi_b^T>

  Mat w = Mat::Zero(2 * m, 2 * m);
  const double w_var = 2.0 * (beta - 1.0) / m;
  const double w_inv = -2.0 * beta / (static_cast<double>(m) * (m - 1));
  for (int j = 0; j < m; ++j) {
    w(j, j) += w_var;
    for (int k2 = 0; k2 < m; ++k2)
      if (k2 != j) w(j, k2) += w_inv;
  }
  const double q_cross = (n - 1.0) / (static_cast<double>(n) * m * m);
  const double q_off = (m_dataset - 1.0) /
                       (static_cast<double>(n) * m_dataset * m * (m - 1));
  const double q_diag = 1.0 / (static_cast<double>(n) * m_dataset * m);
  for (int a = 0; a < 2 * m; ++a)
    for (int bb = 0; bb < 2 * m; ++bb) {
      const bool same = (a < m) == (bb < m);
      double q;
      if (!same) q = q_cross;
      else if (a == bb) q = q_diag;
      else q = q_off;
      w(a, bb) += q * c(a, bb);
    }

  Mat grad = b.transpose() * w * b;
  grad = symmetrized(grad);
  grad.diagonal().array() += lambda_reg;
  return grad;
}

/// Exact gradient of the empirical regularized loss (full-batch oracle).
inline Mat full_batch_gradient(const Mat& features, int n, int m, const Mat& lambda_mat, double beta,
                               double lambda_reg) {
  const long nm = features.rows();
  const int dim = static_cast<int>(features.cols());
  Mat sigma = features.transpose() * features / static_cast<double>(nm);
  Mat sigma_x = Mat::Zero(dim, dim);
  if (m >= 2) {
    for (int i = 0; i < n; ++i) {
      const auto block = features.middleRows(static_cast<long>(i) * m, m);
      const Vec s = block.colwise().sum().transpose();
      sigma_x.noalias() += s * s.transpose() - block.transpose() * block;
    }
    sigma_x /= static_cast<double>(n) * m * (m - 1);
  }
  const Mat sl = sigma * lambda_mat * sigma;
  Mat grad = 2.0 * (beta - 1.0) * sigma - 2.0 * beta * sigma_x + 2.0 * sl;
  grad = symmetrized(grad);
  grad.diagonal().array() += lambda_reg;
  return grad;
}

/// Empirical trace-variance (expected squared Frobenius deviation) of the
/// stochastic gradient over independent minibatches.
inline double estimate_gradient_variance(const Mat& features, int n, int m_dataset,
                                         const Mat& lambda_mat, double beta, double lambda_reg,
                                         int m_batch, int samples, std::uint64_t seed,
                                         bool with_replacement = false) {
  require(samples >= 2, "estimate_gradient_variance: need >= 2 samples");
  Rng rng(seed);
  const int dim = static_cast<int>(features.cols());
  Mat sum = Mat::Zero(dim, dim);
  double sum_sq = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Minibatch mb = sample_minibatch(n, m_dataset, m_batch, rng, with_replacement);
    const Mat g = stochastic_gradient(features, n, m_dataset, mb, lambda_mat, beta, lambda_reg);
    sum += g;
    sum_sq += g.squaredNorm();
  }
  const double mean_sq = sum.squaredNorm() / (static_cast<double>(samples) * samples);
  return (sum_sq / samples - mean_sq) * samples / (samples - 1.0);
}

// ---------------------------------------------------------------------------
// Projected SGD with final averaging
// ---------------------------------------------------------------------------

struct SgdConfig {
  double beta = 1.0;
  double lambda = 1e-2;
  int k = 2;
  enum class Schedule { Constant, InvSqrt } schedule = Schedule::InvSqrt;
  double step_scale = 0.0;  // 0 -> 1 / kappa^2
  long steps = 10000;
  int m = 2;
  std::uint64_t seed = 1;
  long avg_window = 0;     // 0 -> steps / 2
  long trace_interval = 0; // 0 -> max(1, steps / 50)
  bool views_with_replacement = false;

  void validate() const {
    require(steps >= 1, "SgdConfig: steps must be >= 1");
    require(m >= 2, "SgdConfig: m must be >= 2");
    require(beta >= 0.0 && beta <= 1.0, "SgdConfig: beta outside [0,1]");
    require(lambda >= 0.0, "SgdConfig: lambda must be >= 0");
    require(k >= 1, "SgdConfig: k must be >= 1");
  }
};

struct SgdTraceRow {
  long step = 0;
  double loss = 0.0;
  double hs_norm = 0.0;
  int rank = 0;
};

struct SgdResult {
  PsdParam param;       // averaged iterate
  Mat features;         // featurized views (nm x D)
  std::vector<SgdTraceRow> trace;
  double kappa = 0.0;   // max feature norm
};

/// Loss of Lambda under the empirical objective (the k-offset form shared
/// with empirical_loss; exact, via precomputed second moments).
struct SgdLossEval {
  Mat sigma;    // (1/nm) Phi^T Phi
  Mat sigma_x;  // same-parent j != j' second moment
  int k = 0;

  static SgdLossEval make(const Mat& features, int n, int m, int k) {
    SgdLossEval e;
    e.k = k;
    const long nm = features.rows();
    e.sigma = features.transpose() * features / static_cast<double>(nm);
    e.sigma_x = Mat::Zero(features.cols(), features.cols());
    if (m >= 2) {
      for (int i = 0; i < n; ++i) {
        const auto block = features.middleRows(static_cast<long>(i) * m, m);
        const Vec s = block.colwise().sum().transpose();
        e.sigma_x.noalias() += s * s.transpose() - block.transpose() * block;
      }
      e.sigma_x /= static_cast<double>(n) * m * (m - 1);
    }
    return e;
  }

  double loss(const Mat& lambda_mat, double beta) const {
    const Mat ls = lambda_mat * sigma;
    const double quad = (ls * ls).trace();
    return 2.0 * (beta - 1.0) * (lambda_mat * sigma).trace() -
           2.0 * beta * (lambda_mat * sigma_x).trace() + quad + k;
  }
};

inline SgdResult run_sgd(const AugmentedDataset& data, const FeatureMap& feature_map,
                         const SgdConfig& cfg) {
  data.validate();
  cfg.validate();
  require(data.n >= 2, "run_sgd: need at least 2 inputs");
  SgdResult res;
  res.features = feature_map.map_rows(data.views);
  const int dim = static_cast<int>(res.features.cols());
  res.kappa = std::sqrt(res.features.rowwise().squaredNorm().maxCoeff());
  const double step_scale = cfg.step_scale > 0.0 ? cfg.step_scale : 1.0 / (res.kappa * res.kappa);

  PsdParam param;
  param.lambda_mat = Mat::Zero(dim, dim);
  param.hs_cap = cfg.lambda > 0.0 ? cfg.k / cfg.lambda : std::numeric_limits<double>::infinity();

  const SgdLossEval eval = SgdLossEval::make(res.features, data.n, data.m, cfg.k);
  const double initial_loss = eval.loss(param.lambda_mat, cfg.beta);
  const long trace_every = cfg.trace_interval > 0 ? cfg.trace_interval : std::max(1L, cfg.steps / 50);
  const long window = cfg.avg_window > 0 ? std::min(cfg.avg_window, cfg.steps) : std::max(1L, cfg.steps / 2);

  Rng rng(cfg.seed);
  Mat avg_sum = Mat::Zero(dim, dim);
  long averaged = 0;
  for (long t = 1; t <= cfg.steps; ++t) {
    const Minibatch mb =
        sample_minibatch(data.n, data.m, cfg.m, rng, cfg.views_with_replacement);
    const Mat grad = stochastic_gradient(res.features, data.n, data.m, mb, param.lambda_mat,
                                         cfg.beta, cfg.lambda);
    const double eta = cfg.schedule == SgdConfig::Schedule::Constant
                           ? step_scale
                           : step_scale / std::sqrt(static_cast<double>(t));
    param.lambda_mat -= eta * grad;
    param = project_feasible(param);
    if (t > cfg.steps - window) {
      avg_sum += param.lambda_mat;
      ++averaged;
    }
    if (t % trace_every == 0 || t == cfg.steps) {
      SgdTraceRow row;
      row.step = t;
      row.loss = eval.loss(param.lambda_mat, cfg.beta);
      row.hs_norm = param.hs_norm();
      row.rank = 0;
      EigenSystem es = sym_eig_desc(param.lambda_mat);
      const double floor = 1e-10 * std::max(es.values[0], 0.0);
      for (int i = 0; i < es.values.size(); ++i)
        if (es.values[i] > floor) ++row.rank;
      res.trace.push_back(row);
      if (!(row.loss <= 1e6 * std::max(1.0, initial_loss))) {
        std::ostringstream oss;
        oss << "run_sgd: divergence at step " << t << " (loss " << row.loss << ", initial "
            << initial_loss << ")";
        throw numeric_error(oss.str());
      }
    }
  }
  param.lambda_mat = avg_sum / static_cast<double>(averaged);
  res.param = project_feasible(param);
  res.param.hs_cap = param.hs_cap;
  return res;
}

}  // namespace kssl
