// Acceptance suite: one check block per release criterion, each printing a
// single [PASS]/[FAIL] line. Exit code is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kssl/experiments.hpp"

using namespace kssl;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %-34s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double elapsed(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path work_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / "kssl_acceptance" / tag;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<missing:" + p.string() + ">";
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// --------------------------------------------------------------------------
// 1 + 2: closed forms vs exhaustive operators; spectral range; commutation
// --------------------------------------------------------------------------

void criteria_1_2() {
  const auto t0 = std::chrono::steady_clock::now();
  const OracleCheckResult r = run_oracle_check(work_dir("oracle"));
  const double secs = elapsed(t0);
  report(1, "oracle equivalence (d=8)",
         r.max_t_error <= 1e-9 && r.max_k_error <= 1e-9 && secs <= 120.0,
         "max T err " + fmt(r.max_t_error) + ", max K err " + fmt(r.max_k_error) + ", " +
             fmt(secs) + " s");
  report(2, "spectral range + commutation",
         r.spectral_range_excess <= 1e-10 && r.max_commute_error <= 1e-9,
         "range excess " + fmt(r.spectral_range_excess) + ", |TK-KT| " +
             fmt(r.max_commute_error));
}

// --------------------------------------------------------------------------
// 3: Gegenbauer orthogonality (d=10) and FC eigenvalue scaling
// --------------------------------------------------------------------------

void criterion_3() {
  double max_orth = 0.0;
  const int d = 10;
  for (int l = 0; l <= d; ++l)
    for (int lp = 0; lp <= d; ++lp) {
      double acc = 0.0;
      for (int b = 0; b <= d; ++b) {
        const int t = d - 2 * b;
        acc += hypercube_inner_weight(d, b) * gegenbauer_hypercube(l, d, t) *
               gegenbauer_hypercube(lp, d, t);
      }
      const double expect = l == lp ? 1.0 / binomial(d, l) : 0.0;
      max_orth = std::max(max_orth, std::abs(acc - expect));
    }

  bool slopes_ok = true;
  std::string slope_detail;
  for (int ell : {1, 2}) {
    std::vector<double> logd, lognu;
    for (int dd : {8, 16, 32, 64}) {
      const ScalarFn h = KernelSpec::dot_product(HName::ReluNtk, dd).h_fn();
      const double nu = k_eig_dotproduct(h, dd, ell);
      logd.push_back(std::log(static_cast<double>(dd)));
      lognu.push_back(std::log(nu));
    }
    const double slope = ols_line(logd, lognu).first;
    slopes_ok = slopes_ok && std::abs(slope + ell) <= 0.25;
    slope_detail += " l=" + std::to_string(ell) + ": " + fmt(slope);
  }
  report(3, "gegenbauer orthogonality + scaling", max_orth <= 1e-10 && slopes_ok,
         "orth err " + fmt(max_orth) + "," + slope_detail);
}

// --------------------------------------------------------------------------
// 4: closed-form optimality on the half-moon
// --------------------------------------------------------------------------

void criterion_4() {
  HalfmoonConfig moons;
  Rng rng(derive_seed(2024, {41}));
  const HalfmoonSample sample = gen_halfmoon(200, 2, moons, rng);
  const double diam = dataset_diameter(sample.data.inputs);
  const KernelSpec spec = KernelSpec::exponential(diam / 5.0);
  const int k = 8;

  FitOptions opt;
  opt.k = k;
  opt.beta = 1.0;
  opt.lambda = 0.0;
  opt.quiet = true;
  const RepresentationModel model = fit_representation(sample.data, spec, opt);
  const double fitted = empirical_loss(model.anchor_psi(), 200, 2, 1.0);
  double rhs = k;
  for (int i = 0; i < k; ++i) rhs -= std::pow(std::max(model.eigenvalues[i], 0.0), 2);
  const double identity_err = std::abs(fitted - rhs);

  bool beats_all = true;
  Rng comp_rng(derive_seed(2024, {42}));
  double best_competitor = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 50; ++trial) {
    const Mat q = orthonormalize(comp_rng.normal_mat(400, k)) * std::sqrt(400.0);
    const double loss = empirical_loss(q, 200, 2, 1.0);
    best_competitor = std::min(best_competitor, loss);
    beats_all = beats_all && fitted <= loss + 1e-12;
  }

  // beta = 0 path against a direct kernel-PCA oracle
  FitOptions pca_opt;
  pca_opt.k = 5;
  pca_opt.beta = 0.0;
  pca_opt.lambda = 1e-3;
  pca_opt.quiet = true;
  const RepresentationModel pca_model = fit_representation(sample.data, spec, pca_opt);
  const Mat k_hat = gram(spec, sample.data.views, 0.0).entries / 400.0;
  EigenSystem ks = sym_eig_desc(k_hat);
  double min_cos = 1.0;
  for (int i = 0; i < 5; ++i) {
    const double cos =
        std::abs(pca_model.anchor_values.col(i).normalized().dot(ks.vectors.col(i)));
    min_cos = std::min(min_cos, cos);
  }

  report(4, "closed-form optimality",
         beats_all && identity_err <= 1e-6 && min_cos >= 1.0 - 1e-6,
         "identity err " + fmt(identity_err) + ", best competitor +" +
             fmt(best_competitor - fitted) + ", PCA cos " + fmt(min_cos));
}

// --------------------------------------------------------------------------
// 5: SGD consistency (convergence, unbiasedness, variance scaling)
// --------------------------------------------------------------------------

void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();

  // D = 10 feature toy problem shared by all three checks
  Rng gen(derive_seed(2024, {51}));
  const AugmentedDataset data = make_cluster_toy(5, 4, 0.05, gen);
  Mat landmarks(10, 2);
  for (int i = 0; i < 5; ++i) {
    landmarks.row(2 * i) = data.inputs.row(i);
    landmarks.row(2 * i + 1) = data.views.row(4 * i);
  }
  const KernelSpec kspec = KernelSpec::gaussian(1.2);
  const FeatureMap fm = nystrom_features(kspec, landmarks, 1e-9);

  // convergence to the closed-form optimum
  SgdConfig cfg;
  cfg.k = 3;
  cfg.lambda = 0.2;
  cfg.beta = 1.0;
  cfg.steps = 50000;
  cfg.m = 4;
  cfg.seed = derive_seed(2024, {52});
  const SgdResult run = run_sgd(data, fm, cfg);
  const AugmentedDataset feat_data = featurized_dataset(data, fm);
  FitOptions opt;
  opt.k = cfg.k;
  opt.beta = 1.0;
  opt.lambda = cfg.lambda / 2.0;
  opt.quiet = true;
  const RepresentationModel spectral =
      fit_representation(feat_data, KernelSpec::dot_product(HName::Linear), opt);
  const double loss_opt = empirical_loss(spectral.anchor_psi(), data.n, data.m, 1.0);
  const Mat theta = theta_factor(threshold_rank(run.param, cfg.k), cfg.k);
  const double loss_sgd = empirical_loss(run.features * theta.transpose(), data.n, data.m, 1.0);
  const double rel_gap = std::abs(loss_sgd - loss_opt) / std::abs(loss_opt);

  // gradient unbiasedness over 1e5 minibatches
  Rng prng(derive_seed(2024, {53}));
  Mat b = prng.normal_mat(10, 10);
  const Mat lambda_mat = 0.25 * (b * b.transpose()) / 10.0;
  const double beta = 0.8, reg = 0.1;
  const Mat exact = full_batch_gradient(run.features, data.n, data.m, lambda_mat, beta, reg);
  Rng srng(derive_seed(2024, {54}));
  Mat acc = Mat::Zero(10, 10);
  const int samples = 100000;
  for (int s = 0; s < samples; ++s) {
    const Minibatch mb = sample_minibatch(data.n, data.m, 3, srng);
    acc += stochastic_gradient(run.features, data.n, data.m, mb, lambda_mat, beta, reg);
  }
  acc /= static_cast<double>(samples);
  const double unbias_err = (acc - exact).norm() / exact.norm();

  // variance strictly decreases from m=2 to m=8 (3 sigma); view noise large
  // enough that the per-view variance term is the dominant noise source
  Rng vgen(derive_seed(2024, {55}));
  const AugmentedDataset vdata = make_cluster_toy(6, 8, 0.3, vgen);
  const Mat vfeats = fm.map_rows(vdata.views);
  std::vector<double> var2, var8;
  for (int rep = 0; rep < 12; ++rep) {
    var2.push_back(estimate_gradient_variance(vfeats, vdata.n, vdata.m, lambda_mat, 1.0, 1e-2, 2,
                                              400, derive_seed(2024, {56, (std::uint64_t)rep})));
    var8.push_back(estimate_gradient_variance(vfeats, vdata.n, vdata.m, lambda_mat, 1.0, 1e-2, 8,
                                              400, derive_seed(2024, {57, (std::uint64_t)rep})));
  }
  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(var / (v.size() - 1) / v.size())};
  };
  const auto [m2, se2] = stats(var2);
  const auto [m8, se8] = stats(var8);
  const double sep_sigmas = (m2 - m8) / std::sqrt(se2 * se2 + se8 * se8);

  const double secs = elapsed(t0);
  report(5, "sgd consistency",
         rel_gap <= 0.05 && unbias_err <= 1e-2 && sep_sigmas >= 3.0 && secs <= 180.0,
         "gap " + fmt(rel_gap) + ", unbias " + fmt(unbias_err) + ", var sep " + fmt(sep_sigmas) +
             " sigma, " + fmt(secs) + " s");
}

// --------------------------------------------------------------------------
// 6: rate reproduction at desk scale
// --------------------------------------------------------------------------

void criterion_6(int threads) {
  const RateGridConfig cfg;  // full protocol defaults
  const RateGridResult r = run_rate_grid(cfg, 2024, threads, work_dir("rate_grid"));
  const bool down_ok = r.downstream_axis.slope >= -1.3 && r.downstream_axis.slope <= -0.7;
  const bool pre_ok = r.pretraining_axis.slope >= -0.8 && r.pretraining_axis.slope <= -0.3;
  report(6, "rate reproduction",
         down_ok && pre_ok && r.saturation_detected && r.runtime_seconds <= 1800.0,
         "down " + fmt(r.downstream_axis.slope) + ", pre " + fmt(r.pretraining_axis.slope) +
             ", saturation " + (r.saturation_detected ? "yes" : "NO") + ", " +
             fmt(r.runtime_seconds) + " s");
}

// --------------------------------------------------------------------------
// 7: lambda sweep on the sphere
// --------------------------------------------------------------------------

void criterion_7(int threads) {
  const LambdaSweepConfig cfg;  // n=300, k=20, d=8
  const LambdaSweepResult r = run_lambda_sweep(cfg, 2024, threads, work_dir("lambda_sweep"));
  report(7, "lambda sweep crossing",
         r.invariant_best_at_small_lambda && r.low_degree_improves_at_large_lambda &&
             r.all_finite_and_bounded,
         std::string("invariant-best ") + (r.invariant_best_at_small_lambda ? "yes" : "NO") +
             ", low-degree-improves " + (r.low_degree_improves_at_large_lambda ? "yes" : "NO") +
             ", bounded " + (r.all_finite_and_bounded ? "yes" : "NO"));
}

// --------------------------------------------------------------------------
// 8: interplay regimes
// --------------------------------------------------------------------------

void criterion_8() {
  const InterplayConfig cfg;
  const InterplayResult r = run_interplay_report(cfg, 2024, 1, work_dir("interplay"));
  report(8, "interplay regime switches", r.switches_exact && r.monotone_path,
         "crossovers " + fmt(r.crossover_12) + " and " + fmt(r.crossover_23) + ", monotone " +
             (r.monotone_path ? "yes" : "NO"));
}

// --------------------------------------------------------------------------
// 9: capacity demo
// --------------------------------------------------------------------------

void criterion_9() {
  const CapacityDemoConfig cfg;
  const CapacityDemoResult r = run_capacity_demo(cfg, 2024, 1, work_dir("capacity"));
  report(9, "capacity demo", r.top_mass_fraction >= 0.9 && r.sign_agreement >= 0.9,
         "collapse mass " + fmt(r.top_mass_fraction) + ", sign agreement " +
             fmt(r.sign_agreement));
}

// --------------------------------------------------------------------------
// 10: downstream closed form and effective dimension
// --------------------------------------------------------------------------

void criterion_10() {
  Rng rng(derive_seed(2024, {101}));
  const Mat psi = rng.normal_mat(20, 4);
  const Mat y = rng.normal_mat(20, 2);
  const double gamma = 1e-2;
  const RidgeProbe probe = fit_probe(psi, y, gamma);
  // 1e4 gradient steps on the same objective
  const Mat sigma = psi.transpose() * psi / 20.0;
  const Mat bvec = psi.transpose() * y / 20.0;
  EigenSystem es = sym_eig_desc(sigma);
  const double lip = 2.0 * (es.values[0] + gamma);
  Mat w = Mat::Zero(4, 2);
  for (int t = 0; t < 10000; ++t) w -= (1.0 / lip) * (2.0 * (sigma * w - bvec) + 2.0 * gamma * w);
  const double rel_w = (probe.weights - w).norm() / probe.weights.norm();

  bool eff_ok = true;
  for (int inst = 0; inst < 5; ++inst) {
    const Mat p = rng.normal_mat(50, 6);
    double prev = 6.0 + 1e-12;
    for (double g : {0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0}) {
      const double ke = effective_dimension(p, g);
      if (!(ke >= 0.0 && ke <= 6.0 + 1e-12 && ke <= prev + 1e-12)) eff_ok = false;
      prev = ke;
    }
  }
  report(10, "downstream closed form", rel_w <= 1e-6 && eff_ok,
         "ridge vs GD " + fmt(rel_w) + ", effective dimension monotone " + (eff_ok ? "yes" : "NO"));
}

// --------------------------------------------------------------------------
// 11: CLI determinism (byte-identical CSVs for every verb)
// --------------------------------------------------------------------------

bool same_dir_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(a))
    if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
  if (names.empty()) return false;
  std::sort(names.begin(), names.end());
  for (const auto& n : names)
    if (slurp(a / n) != slurp(b / n)) return false;
  return true;
}

void criterion_11(const std::string& cli) {
  const auto base = work_dir("determinism");
  std::ofstream(base / "small.json") << R"({
    "rate_grid": {"n_pre_grid": [16,32,64,128], "n_down_grid": [16,32,64,128],
                  "anchor_n_pre": 128, "anchor_n_down": 128, "saturation_n_pre": 16,
                  "pre_trials": 3, "test_points": 64},
    "lambda_sweep": {"n": 40, "trials": 2, "test_points": 50, "k": 6},
    "sgd_train": {"steps": 2000, "k": 3, "lambda": 0.1}
  })";
  const std::string cfg = " --config " + (base / "small.json").string();

  bool all_ok = true;
  std::string detail;
  const std::vector<std::pair<std::string, std::string>> verbs = {
      {"spectra-table", ""}, {"rate-grid", cfg}, {"lambda-sweep", cfg}, {"capacity-demo", ""},
      {"interplay", ""},     {"sgd-train", cfg}, {"oracle-check", ""}};
  for (const auto& [verb, extra] : verbs) {
    const auto d1 = base / (verb + "_1"), d2 = base / (verb + "_2");
    for (const auto& d : {d1, d2}) {
      const std::string cmd = cli + " " + verb + " --seed 2024 --threads 2 --out " + d.string() +
                              extra + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        all_ok = false;
        detail += verb + ":run-failed ";
      }
    }
    if (!same_dir_bytes(d1, d2)) {
      all_ok = false;
      detail += verb + ":mismatch ";
    }
  }
  report(11, "CLI determinism", all_ok, all_ok ? "all verbs byte-identical" : detail);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = 2;
  const std::string cli = argc > 1 ? argv[1] : "";
  std::printf("acceptance suite (threads=%d)\n", threads);

  criteria_1_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_7(threads);
  criterion_8();
  criterion_9();
  criterion_10();
  if (!cli.empty()) {
    criterion_11(cli);
  } else {
    report(11, "CLI determinism", false, "CLI path not supplied to the acceptance binary");
  }
  criterion_6(threads);  // the long run goes last

  std::printf("%s\n", failures == 0 ? "ALL ACCEPTANCE CRITERIA PASSED"
                                    : "ACCEPTANCE FAILURES PRESENT");
  return failures;
}
