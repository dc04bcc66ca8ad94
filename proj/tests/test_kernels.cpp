#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kssl/kernels.hpp"
#include "kssl/rng.hpp"

using namespace kssl;

namespace {

Mat random_points(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  return rng.normal_mat(n, dim);
}

Mat random_sphere_points(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Mat pts(n, dim);
  for (int i = 0; i < n; ++i) pts.row(i) = rng.sphere_vec(dim).transpose();
  return pts;
}

}  // namespace

TEST_CASE("eval_kernel basics") {
  const KernelSpec g = KernelSpec::gaussian(1.3);
  Vec x = Vec::Zero(3), y = Vec::Zero(3);
  CHECK(eval_kernel(g, x, x) == 1.0);
  y[0] = 0.7;
  CHECK(eval_kernel(g, x, y) == doctest::Approx(std::exp(-0.49 / (2 * 1.3 * 1.3))));

  const KernelSpec e = KernelSpec::exponential(0.5);
  CHECK(eval_kernel(e, x, x) == 1.0);
  CHECK(eval_kernel(e, x, y) == doctest::Approx(std::exp(-0.7 / 0.5)));

  const KernelSpec s = KernelSpec::sphere_arccos();
  Vec u(2), v(2);
  u << 1, 0;
  v << 1, 0;
  CHECK(eval_kernel(s, u, v) == doctest::Approx(2.0));  // (1+1)(1 - 0)
  v << -1, 0;
  CHECK(eval_kernel(s, u, v) == doctest::Approx(0.0));  // kappa(-1) = 0

  Vec bad(4);
  CHECK_THROWS_AS((void)eval_kernel(g, x, bad), input_error);
}

TEST_CASE("kernel symmetry over random pairs") {
  const Mat pts = random_points(2000, 3, 21);
  const std::vector<KernelSpec> specs = {KernelSpec::gaussian(0.8), KernelSpec::exponential(1.1),
                                         KernelSpec::dot_product(HName::ReluNtk, 3)};
  for (const auto& spec : specs)
    for (int i = 0; i < 1000; ++i) {
      const Vec a = pts.row(2 * i).transpose();
      const Vec b = pts.row(2 * i + 1).transpose();
      CHECK(eval_kernel(spec, a, b) == eval_kernel(spec, b, a));
    }
}

TEST_CASE("gram is PSD with jitter") {
  const Mat pts = random_points(50, 2, 33);
  for (const auto& spec : {KernelSpec::gaussian(0.7), KernelSpec::exponential(0.9)}) {
    const GramMatrix g = gram(spec, pts, 1e-8);
    CHECK(max_abs(g.entries - g.entries.transpose()) == 0.0);
    EigenSystem es = sym_eig_desc(g.entries);
    CHECK(es.values[es.values.size() - 1] >= -1e-8);
  }
  const GramMatrix single = gram(KernelSpec::gaussian(1.0), Mat::Zero(1, 2), 0.0);
  CHECK(single.entries(0, 0) == 1.0);

  Mat dup(2, 2);
  dup << 0.3, -0.2, 0.3, -0.2;
  const GramMatrix two = gram(KernelSpec::gaussian(1.0), dup, 0.0);
  CHECK(max_abs(two.entries - Mat::Ones(2, 2)) < 1e-15);
  EigenSystem es = sym_eig_desc(two.entries);
  CHECK(es.values[0] == doctest::Approx(2.0));
  CHECK(es.values[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sphere arccos gram is PSD on sphere points") {
  const Mat pts = random_sphere_points(40, 4, 5);
  const GramMatrix g = gram(KernelSpec::sphere_arccos(), pts, 1e-8);
  EigenSystem es = sym_eig_desc(g.entries);
  CHECK(es.values[es.values.size() - 1] >= -1e-8);
}

TEST_CASE("estimate_h identity activation oracle") {
  // identity: h(t) = E[a b] + t E[1] = 2t for correlated standard normals.
  const double h_half = estimate_h(identity_activation(), 4, 0.5, 400000, 7);
  CHECK(h_half == doctest::Approx(1.0).epsilon(0.01));
  const double h_zero = estimate_h(identity_activation(), 4, 0.0, 400000, 7);
  CHECK(std::abs(h_zero) < 0.01);
}

TEST_CASE("estimate_h relu at t=1 matches half-Gaussian moments") {
  // E[relu(z)^2] = 1/2, E[relu'(z)^2] = 1/2 for standard normal z.
  const double h_one = estimate_h(relu_activation(), 8, 1.0, 400000, 11);
  CHECK(h_one == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("estimate_h matches the closed arc-cosine form") {
  for (double t : {-0.8, -0.3, 0.0, 0.4, 0.9}) {
    const double mc = estimate_h(relu_activation(), 6, t, 600000, 23);
    CHECK(mc == doctest::Approx(relu_ntk_h(t)).epsilon(0.02));
  }
}

TEST_CASE("estimate_h errors and determinism") {
  CHECK_THROWS_AS((void)estimate_h(relu_activation(), 4, 0.3, 0, 1), input_error);
  CHECK(estimate_h(relu_activation(), 4, 0.3, 1000, 5) == estimate_h(relu_activation(), 4, 0.3, 1000, 5));
}

TEST_CASE("estimate_h standard error halves when samples double") {
  auto se = [](long samples) {
    std::vector<double> vals;
    for (int rep = 0; rep < 20; ++rep)
      vals.push_back(estimate_h(relu_activation(), 4, 0.4, samples, 1000 + rep));
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    return std::sqrt(var / (vals.size() - 1));
  };
  const double se1 = se(2000);
  const double se2 = se(8000);  // quadruple -> expect half
  CHECK(se2 < se1);
  CHECK(se2 / se1 == doctest::Approx(0.5).epsilon(0.6));
}

TEST_CASE("nystrom features reproduce the landmark gram") {
  const KernelSpec spec = KernelSpec::gaussian(0.9);
  // single landmark
  const Mat one = Mat::Zero(1, 2);
  const FeatureMap fm1 = nystrom_features(spec, one, 0.0);
  const Vec f = fm1(Vec::Zero(2));
  CHECK(f.size() == 1);
  CHECK(f[0] == doctest::Approx(1.0));

  // two orthogonal sphere points under the arc-cosine kernel
  Mat sp(2, 3);
  sp << 1, 0, 0, 0, 1, 0;
  const KernelSpec arc = KernelSpec::sphere_arccos();
  const FeatureMap fm2 = nystrom_features(arc, sp, 0.0);
  const Mat feats2 = fm2.map_rows(sp);
  const Mat back2 = feats2 * feats2.transpose();
  CHECK(max_abs(back2 - gram(arc, sp, 0.0).entries) < 1e-8);

  // twenty random landmarks
  const Mat pts = random_points(20, 2, 77);
  const double jit = default_jitter(spec, pts);
  const FeatureMap fm3 = nystrom_features(spec, pts, jit);
  const Mat feats3 = fm3.map_rows(pts);
  const Mat back3 = feats3 * feats3.transpose();
  CHECK(max_abs(back3 - gram(spec, pts, 0.0).entries) < 1e-6);
}

TEST_CASE("nystrom reports a condition number on singular landmarks") {
  Mat dup(2, 2);
  dup << 0.5, 0.5, 0.5, 0.5;  // identical landmarks, jitter 0
  try {
    (void)nystrom_features(KernelSpec::gaussian(1.0), dup, 0.0);
    CHECK(false);
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("condition number") != std::string::npos);
  }
}

TEST_CASE("kernel spec serialization round-trips") {
  for (const auto& spec : {KernelSpec::gaussian(0.37), KernelSpec::exponential(2.5),
                           KernelSpec::dot_product(HName::ReluNtk, 9), KernelSpec::sphere_arccos()}) {
    const KernelSpec back = kernel_from_json(kernel_to_json(spec));
    CHECK(back.kind == spec.kind);
    CHECK(back.scale == spec.scale);
    CHECK(back.h == spec.h);
    CHECK(back.q == spec.q);
  }
}
