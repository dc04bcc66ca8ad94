#pragma once

#include <json.hpp>

#include "kssl/dataset.hpp"
#include "kssl/linalg.hpp"
#include "kssl/spectral.hpp"

namespace kssl {

/// Ridge-regularized linear probe on top of a frozen representation.
struct RidgeProbe {
  Mat weights;  // k x d_y
  double gamma = 0.0;
  bool used_pseudo_inverse = false;
  std::string model_id;  // id of the representation this probe was fitted on

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model_id"] = model_id;
    j["gamma"] = gamma;
    j["used_pseudo_inverse"] = used_pseudo_inverse;
    nlohmann::json rows = nlohmann::json::array();
    for (long i = 0; i < weights.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (long c = 0; c < weights.cols(); ++c) row.push_back(weights(i, c));
      rows.push_back(std::move(row));
    }
    j["weights"] = rows;
    return j;
  }

  static RidgeProbe from_json(const nlohmann::json& j) {
    RidgeProbe p;
    p.model_id = j.value("model_id", "");
    p.gamma = j.at("gamma").get<double>();
    p.used_pseudo_inverse = j.value("used_pseudo_inverse", false);
    const auto& rows = j.at("weights");
    const long r = static_cast<long>(rows.size());
    const long c = r > 0 ? static_cast<long>(rows[0].size()) : 0;
    p.weights.resize(r, c);
    for (long i = 0; i < r; ++i)
      for (long cc = 0; cc < c; ++cc) p.weights(i, cc) = rows[i][cc].get<double>();
    return p;
  }
};

/// w = (Sigma + gamma I)^{-1} (1/n) sum_i psi(x_i) y_i^T with
/// Sigma = (1/n) sum_i psi(x_i) psi(x_i)^T.
inline RidgeProbe fit_probe(const Mat& psi, const Mat& y, double gamma) {
  require(psi.rows() == y.rows() && psi.rows() >= 1, "fit_probe: empty or misaligned data");
  require(gamma >= 0.0, "fit_probe: gamma must be >= 0");
  const double n = static_cast<double>(psi.rows());
  const Mat sigma = psi.transpose() * psi / n;
  const Mat b = psi.transpose() * y / n;
  RidgeProbe probe;
  probe.gamma = gamma;
  if (gamma > 0.0) {
    Mat reg = sigma;
    reg.diagonal().array() += gamma;
    Eigen::LLT<Mat> llt(reg);
    if (llt.info() == Eigen::Success) {
      probe.weights = llt.solve(b);
      return probe;
    }
  }
  PsdSpectrum s = psd_spectrum(sigma, 1e-12);
  if (gamma == 0.0 && s.kept < sigma.rows()) probe.used_pseudo_inverse = true;
  Mat inv = Mat::Zero(sigma.rows(), sigma.cols());
  for (int i = 0; i < s.kept; ++i)
    inv.noalias() += (1.0 / (s.values[i] + gamma)) * s.vectors.col(i) * s.vectors.col(i).transpose();
  probe.weights = inv * b;
  return probe;
}

inline RidgeProbe fit_probe(const RepresentationModel& model, const LabeledDataset& data,
                            double gamma) {
  data.validate();
  return fit_probe(model.evaluate_rows(data.points), data.targets, gamma);
}

inline Mat probe_predict(const RidgeProbe& probe, const Mat& psi) { return psi * probe.weights; }

/// Mean squared error on test data; with a target norm given, the relative
/// excess risk ||f_hat - f*||^2 / ||f*||^2.
inline double excess_risk(const RidgeProbe& probe, const Mat& psi_test, const Mat& y_test,
                          double target_norm = 0.0) {
  require(psi_test.rows() == y_test.rows() && psi_test.rows() >= 1, "excess_risk: empty test set");
  const Mat resid = probe_predict(probe, psi_test) - y_test;
  const double mse = resid.squaredNorm() / static_cast<double>(resid.rows());
  if (target_norm > 0.0) return mse / target_norm;
  return mse;
}

/// Argmax decoding of the least-squares surrogate; ties go to the lowest index.
inline int classify(const RidgeProbe& probe, const Vec& psi_x) {
  const Vec out = probe.weights.transpose() * psi_x;
  int best = 0;
  for (int i = 1; i < out.size(); ++i)
    if (out[i] > out[best]) best = i;
  return best;
}

/// trace(Sigma (Sigma + gamma I)^{-1}) on the empirical covariance of the
/// representation; lies in [0, k].
inline double effective_dimension(const Mat& psi_points, double gamma) {
  require(psi_points.rows() >= 1, "effective_dimension: empty point set");
  require(gamma >= 0.0, "effective_dimension: gamma must be >= 0");
  const Mat sigma = psi_points.transpose() * psi_points / static_cast<double>(psi_points.rows());
  PsdSpectrum s = psd_spectrum(sigma, 1e-14);
  double acc = 0.0;
  for (int i = 0; i < s.values.size(); ++i) {
    const double d = std::max(s.values[i], 0.0);
    if (d + gamma > 0.0) acc += d / (d + gamma);
  }
  return acc;
}

inline double effective_dimension(const RepresentationModel& model, const Mat& points, double gamma) {
  return effective_dimension(model.evaluate_rows(points), gamma);
}

}  // namespace kssl
