#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kssl/probe.hpp"
#include "kssl/rng.hpp"

using namespace kssl;

namespace {

/// Gradient-descent minimizer of (1/n) |psi w - y|^2 + gamma |w|^2.
Mat gd_probe(const Mat& psi, const Mat& y, double gamma, int steps) {
  const double n = static_cast<double>(psi.rows());
  const Mat sigma = psi.transpose() * psi / n;
  const Mat b = psi.transpose() * y / n;
  EigenSystem es = sym_eig_desc(sigma);
  const double lip = 2.0 * (es.values[0] + gamma);
  Mat w = Mat::Zero(psi.cols(), y.cols());
  for (int t = 0; t < steps; ++t) {
    const Mat grad = 2.0 * (sigma * w - b) + 2.0 * gamma * w;
    w -= (1.0 / lip) * grad;
  }
  return w;
}

}  // namespace

TEST_CASE("fit_probe closed forms") {
  Rng rng(5);
  const Mat psi = rng.normal_mat(40, 3);

  // zero labels -> zero weights
  const RidgeProbe zero = fit_probe(psi, Mat::Zero(40, 2), 1e-3);
  CHECK(max_abs(zero.weights) == 0.0);

  // k=1, psi == 1, gamma=0 -> w = mean(y)
  const Mat ones = Mat::Ones(25, 1);
  Mat y(25, 1);
  for (int i = 0; i < 25; ++i) y(i, 0) = std::sin(0.3 * i);
  const RidgeProbe mean_probe = fit_probe(ones, y, 0.0);
  CHECK(mean_probe.weights(0, 0) == doctest::Approx(y.mean()).epsilon(1e-12));

  // shrinkage: |w| decreases monotonically along a gamma grid
  const Mat yy = rng.normal_mat(40, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (double g : {0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e3}) {
    const double norm = fit_probe(psi, yy, g).weights.norm();
    CHECK(norm <= prev + 1e-12);
    prev = norm;
  }
}

TEST_CASE("closed form matches an iterative minimizer to 1e-6") {
  Rng rng(9);
  const Mat psi = rng.normal_mat(20, 4);
  const Mat y = rng.normal_mat(20, 2);
  const double gamma = 1e-2;
  const RidgeProbe probe = fit_probe(psi, y, gamma);
  const Mat w_gd = gd_probe(psi, y, gamma, 10000);
  CHECK((probe.weights - w_gd).norm() / probe.weights.norm() <= 1e-6);
}

TEST_CASE("gamma = 0 with singular covariance falls back to the pseudo-inverse") {
  Mat psi(6, 3);
  psi << 1, 1, 0, 1, 1, 0, 2, 2, 0, 3, 3, 0, 1, 1, 0, 0, 0, 0;  // rank 1
  Rng rng(3);
  const Mat y = rng.normal_mat(6, 1);
  const RidgeProbe probe = fit_probe(psi, y, 0.0);
  CHECK(probe.used_pseudo_inverse);
  CHECK(probe.weights.allFinite());
}

TEST_CASE("excess risk basics") {
  Rng rng(13);
  const Mat psi = rng.normal_mat(30, 3);
  Mat w_true = rng.normal_mat(3, 1);
  const Mat y = psi * w_true;
  const RidgeProbe exact = fit_probe(psi, y, 0.0);
  CHECK(excess_risk(exact, psi, y) <= 1e-16);

  // zero probe on a unit-norm target: relative excess risk 1
  RidgeProbe zero;
  zero.weights = Mat::Zero(3, 1);
  const double norm = y.squaredNorm() / y.rows();
  CHECK(excess_risk(zero, psi, y, norm) == doctest::Approx(1.0));
  CHECK(excess_risk(exact, psi, y) >= 0.0);
}

TEST_CASE("classification decoding and separable data") {
  RidgeProbe probe;
  probe.weights = Mat::Identity(4, 4);
  Vec out(4);
  out << 0.9, 0.1, 0.0, 0.0;
  CHECK(classify(probe, out) == 0);
  out << 0.5, 0.5, 0.0, 0.0;
  CHECK(classify(probe, out) == 0);  // tie -> lowest index

  // noiseless linearly separated two-cluster toy: 100% train accuracy
  Rng rng(31);
  const int n = 50;
  Mat psi(n, 2);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    labels[i] = c;
    psi(i, 0) = (c == 0 ? 1.0 : -1.0) + 0.05 * rng.normal();
    psi(i, 1) = 0.3 * rng.normal();
  }
  const Mat y = one_hot(labels, 2);
  const RidgeProbe sep = fit_probe(psi, y, 1e-8);
  for (int i = 0; i < n; ++i) CHECK(classify(sep, psi.row(i).transpose()) == labels[i]);
}

TEST_CASE("effective dimension limits and monotonicity") {
  Rng rng(7);
  const int k = 6;
  const Mat psi = rng.normal_mat(200, k);
  CHECK(effective_dimension(psi, 0.0) == doctest::Approx(static_cast<double>(k)).epsilon(1e-9));
  CHECK(effective_dimension(psi, 1e12) <= 1e-6);
  for (int inst = 0; inst < 5; ++inst) {
    const Mat p = rng.normal_mat(60, 4);
    double prev = 4.0 + 1e-9;
    for (double g : {0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
      const double ke = effective_dimension(p, g);
      CHECK(ke <= prev + 1e-12);
      CHECK(ke >= 0.0);
      CHECK(ke <= 4.0 + 1e-12);
      prev = ke;
    }
  }
}

TEST_CASE("probe serialization round-trips with its model reference") {
  Rng rng(23);
  const Mat psi = rng.normal_mat(30, 3);
  const Mat y = rng.normal_mat(30, 2);
  RidgeProbe probe = fit_probe(psi, y, 1e-3);
  probe.model_id = "halfmoon-run-7";
  const RidgeProbe back = RidgeProbe::from_json(probe.to_json());
  CHECK(back.model_id == probe.model_id);
  CHECK(back.gamma == probe.gamma);
  CHECK(max_abs(back.weights - probe.weights) == 0.0);
}

TEST_CASE("predictions are invariant to orthogonal re-parameterizations") {
  Rng rng(17);
  const Mat psi = rng.normal_mat(50, 4);
  const Mat y = rng.normal_mat(50, 2);
  const double gamma = 1e-2;
  const RidgeProbe base = fit_probe(psi, y, gamma);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat u = orthonormalize(rng.normal_mat(4, 4));
    const RidgeProbe rotated = fit_probe(psi * u, y, gamma);
    const Mat pred_base = probe_predict(base, psi);
    const Mat pred_rot = probe_predict(rotated, psi * u);
    CHECK(max_abs(pred_base - pred_rot) <= 1e-9);
  }
}
