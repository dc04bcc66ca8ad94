#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>

#include <json.hpp>

#include "kssl/csvio.hpp"
#include "kssl/dataset.hpp"
#include "kssl/probe.hpp"
#include "kssl/sgd.hpp"
#include "kssl/spectra.hpp"
#include "kssl/spectral.hpp"

namespace kssl {

// ---------------------------------------------------------------------------
// Half-moon generator (two interlocking half circles, four noisy classes)
// ---------------------------------------------------------------------------

struct HalfmoonConfig {
  double sigma = 0.1;        // input and view noise
  double moon_tau = 0.05;    // moon-membership softness over arc distances
  double profile_amp = 1.1;  // clipped first-harmonic class profile (~15% Bayes error)
};

namespace detail {

struct Arc {
  double cx, cy, lo, hi;  // circle center and angular range
};

inline std::array<Arc, 2> halfmoon_moon_arcs() {
  // Moon A = right half circle raised by e2 (classes 0, 1), moon B = left
  // half circle (classes 2, 3).
  return {Arc{0.0, 1.0, -M_PI / 2, M_PI / 2}, Arc{0.0, 0.0, M_PI / 2, 3 * M_PI / 2}};
}

inline double arc_distance(double x, double y, const Arc& arc) {
  const double px = x - arc.cx, py = y - arc.cy;
  double phi = std::atan2(py, px);
  if (phi < arc.lo) phi += 2 * M_PI;
  double psi;
  if (phi >= arc.lo && phi <= arc.hi) {
    psi = phi;
  } else {
    auto cyc = [](double a, double b) {
      double d = std::abs(a - b);
      return std::min(d, 2 * M_PI - d);
    };
    psi = cyc(phi, arc.lo) <= cyc(phi, arc.hi) ? arc.lo : arc.hi;
  }
  const double qx = arc.cx + std::cos(psi), qy = arc.cy + std::sin(psi);
  return std::hypot(x - qx, y - qy);
}

}  // namespace detail

/// P(Y = c | X): moon membership (softmax of -arc distance / moon_tau, all
/// but deterministic at the default sharpness) times a two-class profile
/// (1 +- g)/2 along each moon, with g a clipped first harmonic of the arc
/// position. The conditional is then a combination of per-moon constants and
/// per-moon single-oscillation waves, the leading structure a representation
/// pretrained on this geometry can express.
inline Mat halfmoon_cond_probs(const Mat& points, const HalfmoonConfig& cfg) {
  const auto arcs = detail::halfmoon_moon_arcs();
  Mat probs(points.rows(), 4);
  for (long i = 0; i < points.rows(); ++i) {
    const double x = points(i, 0), y = points(i, 1);
    const double d0 = detail::arc_distance(x, y, arcs[0]);
    const double d1 = detail::arc_distance(x, y, arcs[1]);
    const double em = std::exp(-(d0 - std::min(d0, d1)) / cfg.moon_tau);
    const double eo = std::exp(-(d1 - std::min(d0, d1)) / cfg.moon_tau);
    const double p_moon_a = em / (em + eo);
    // first-harmonic class profile in the angular position along each moon
    const double phi_a = std::atan2(y - arcs[0].cy, x - arcs[0].cx);
    const double g_a = std::clamp(cfg.profile_amp * -std::sin(phi_a), -1.0, 1.0);
    double phi_b = std::atan2(y - arcs[1].cy, x - arcs[1].cx);
    if (phi_b < arcs[1].lo) phi_b += 2 * M_PI;
    const double g_b = std::clamp(cfg.profile_amp * std::sin(phi_b), -1.0, 1.0);
    probs(i, 0) = p_moon_a * 0.5 * (1.0 + g_a);
    probs(i, 1) = p_moon_a * 0.5 * (1.0 - g_a);
    probs(i, 2) = (1.0 - p_moon_a) * 0.5 * (1.0 + g_b);
    probs(i, 3) = (1.0 - p_moon_a) * 0.5 * (1.0 - g_b);
  }
  return probs;
}

struct HalfmoonSample {
  AugmentedDataset data;
  std::vector<int> labels;  // 4 classes
  std::vector<int> moon;    // 0 = raised moon, 1 = other
  Mat cond_probs;           // n x 4
};

/// X = Z + 1{<Z,e1> > 0} e2 + U with Z uniform on the unit circle and
/// U ~ N(0, sigma^2 I); views are X + V with the same noise scale.
inline HalfmoonSample gen_halfmoon(int n, int m, const HalfmoonConfig& cfg, Rng& rng) {
  require(n >= 1 && m >= 1, "gen_halfmoon: n, m must be >= 1");
  require(cfg.sigma >= 0.0, "gen_halfmoon: sigma must be >= 0");
  HalfmoonSample s;
  s.data.n = n;
  s.data.m = m;
  s.data.inputs.resize(n, 2);
  s.data.views.resize(static_cast<long>(n) * m, 2);
  s.moon.resize(n);
  for (int i = 0; i < n; ++i) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double zx = std::cos(theta), zy = std::sin(theta);
    const int raised = zx > 0.0 ? 1 : 0;
    s.moon[i] = raised ? 0 : 1;
    const double x = zx + cfg.sigma * rng.normal();
    const double y = zy + (raised ? 1.0 : 0.0) + cfg.sigma * rng.normal();
    s.data.inputs(i, 0) = x;
    s.data.inputs(i, 1) = y;
    for (int j = 0; j < m; ++j) {
      s.data.views(static_cast<long>(i) * m + j, 0) = x + cfg.sigma * rng.normal();
      s.data.views(static_cast<long>(i) * m + j, 1) = y + cfg.sigma * rng.normal();
    }
  }
  s.cond_probs = halfmoon_cond_probs(s.data.inputs, cfg);
  s.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int c = 3;
    for (int cc = 0; cc < 4; ++cc) {
      acc += s.cond_probs(i, cc);
      if (u < acc) {
        c = cc;
        break;
      }
    }
    s.labels[i] = c;
  }
  return s;
}

/// Max pairwise distance between inputs (kernel-scale reference).
inline double dataset_diameter(const Mat& points) {
  double best = 0.0;
  for (long i = 0; i < points.rows(); ++i)
    for (long j = i + 1; j < points.rows(); ++j)
      best = std::max(best, (points.row(i) - points.row(j)).norm());
  return best;
}

/// Connected components under single linkage at the given radius.
inline std::vector<int> single_linkage_components(const Mat& points, double radius) {
  const long n = points.rows();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j)
      if ((points.row(i) - points.row(j)).norm() <= radius) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
  std::vector<int> label(n);
  std::map<int, int> remap;
  for (long i = 0; i < n; ++i) {
    const int root = find(static_cast<int>(i));
    auto it = remap.find(root);
    if (it == remap.end()) it = remap.emplace(root, static_cast<int>(remap.size())).first;
    label[i] = it->second;
  }
  return label;
}

// ---------------------------------------------------------------------------
// Sphere task (uniform S^{d-1}, cyclic-shift views, Gegenbauer targets)
// ---------------------------------------------------------------------------

inline Vec shift_coordinates(const Vec& x, int s) {
  const int d = static_cast<int>(x.size());
  Vec y(d);
  for (int i = 0; i < d; ++i) y[i] = x[((i - s) % d + d) % d];
  return y;
}

/// f1*(x) = (1/3) sum_{j<3} Q_{1,d}(x_j): degree 1, not shift invariant.
inline double sphere_f1(const Vec& x) { return (x[0] + x[1] + x[2]) / 3.0; }

/// f3*(x) = (1/d) sum_j Q_{3,d}(x_j): degree 3, invariant to cyclic shifts.
inline double sphere_f3(const Vec& x) {
  const int d = static_cast<int>(x.size());
  double acc = 0.0;
  for (int j = 0; j < d; ++j) acc += sphere_gegenbauer(3, d, x[j]);
  return acc / d;
}

struct SphereTask {
  AugmentedDataset data;  // m = 3 views: coordinate shifts -1, 0, +1
  Mat targets;            // n x 2: (f1*, f3*), noiseless
};

inline SphereTask gen_sphere_task(int n, int d, Rng& rng) {
  require(n >= 1, "gen_sphere_task: n must be >= 1");
  require(d >= 4, "gen_sphere_task: d must be >= 4");
  SphereTask task;
  task.data.n = n;
  task.data.m = 3;
  task.data.inputs.resize(n, d);
  task.data.views.resize(3L * n, d);
  task.targets.resize(n, 2);
  const int shifts[3] = {-1, 0, 1};
  for (int i = 0; i < n; ++i) {
    const Vec x = rng.sphere_vec(d);
    task.data.inputs.row(i) = x.transpose();
    for (int j = 0; j < 3; ++j)
      task.data.views.row(3L * i + j) = shift_coordinates(x, shifts[j]).transpose();
    task.targets(i, 0) = sphere_f1(x);
    task.targets(i, 1) = sphere_f3(x);
  }
  return task;
}

inline Mat sphere_targets(const Mat& points) {
  Mat t(points.rows(), 2);
  for (long i = 0; i < points.rows(); ++i) {
    const Vec x = points.row(i).transpose();
    t(i, 0) = sphere_f1(x);
    t(i, 1) = sphere_f3(x);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Log-log slope fitting with bootstrap confidence interval
// ---------------------------------------------------------------------------

struct RateFit {
  struct GridEntry {
    double size = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    int trials = 0;
  };
  std::vector<GridEntry> grid;
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // conservative bootstrap band (0.2%..99.8%)
};

/// OLS on (log size, log mean error); CI from >= 100 bootstrap resamples of
/// the per-size trial errors. Requires >= 4 distinct sizes, positive errors.
inline RateFit fit_slope(const std::vector<std::pair<double, double>>& size_error,
                         int bootstrap_resamples = 500, std::uint64_t seed = 17) {
  std::map<double, std::vector<double>> groups;
  for (const auto& [size, err] : size_error) {
    require(size > 0.0, "fit_slope: sizes must be positive");
    if (!(err > 0.0)) throw input_error("fit_slope: non-positive error value");
    groups[size].push_back(err);
  }
  require(groups.size() >= 4, "fit_slope: need >= 4 grid points");
  require(bootstrap_resamples >= 100, "fit_slope: need >= 100 bootstrap resamples");

  RateFit fit;
  std::vector<double> logx, logy;
  for (const auto& [size, errs] : groups) {
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    var = errs.size() > 1 ? var / (static_cast<double>(errs.size()) - 1) : 0.0;
    fit.grid.push_back({size, mean, std::sqrt(var), static_cast<int>(errs.size())});
    logx.push_back(std::log(size));
    logy.push_back(std::log(mean));
  }
  auto [slope, intercept] = ols_line(logx, logy);
  fit.slope = slope;
  fit.intercept = intercept;

  Rng rng(seed);
  std::vector<double> slopes(bootstrap_resamples);
  for (int b = 0; b < bootstrap_resamples; ++b) {
    std::vector<double> ly;
    ly.reserve(groups.size());
    bool ok = true;
    for (const auto& [size, errs] : groups) {
      double mean = 0.0;
      for (std::size_t r = 0; r < errs.size(); ++r)
        mean += errs[rng.below(errs.size())];
      mean /= static_cast<double>(errs.size());
      if (!(mean > 0.0)) {
        ok = false;
        break;
      }
      ly.push_back(std::log(mean));
    }
    slopes[b] = ok ? ols_line(logx, ly).first : slope;
  }
  std::sort(slopes.begin(), slopes.end());
  const auto pick = [&](double q) {
    const int i = std::min<int>(bootstrap_resamples - 1,
                                std::max(0, static_cast<int>(q * (bootstrap_resamples - 1))));
    return slopes[i];
  };
  fit.ci_lo = pick(0.002);
  fit.ci_hi = pick(0.998);
  return fit;
}

// ---------------------------------------------------------------------------
// Rate grid (pretraining size x downstream size)
// ---------------------------------------------------------------------------

struct RateGridConfig {
  std::vector<int> n_pre_grid = {32, 64, 128, 256, 512, 1024, 2048};
  std::vector<int> n_down_grid = {32, 64, 128, 256, 512, 1024, 2048};
  int pre_trials = 100;
  int down_trials_per_pre = 2;  // 100 x 2 = 200 downstream trials per cell
  int anchor_n_pre = 2048;      // row used for the downstream-axis slope
  int anchor_n_down = 2048;     // column used for the pretraining-axis slope
  int saturation_n_pre = 64;
  // k covers the four class-profile functions plus the wave impurities the
  // finite kernel scale induces; the approximation floor then sits well below
  // the noise-variance term across the whole grid (source-condition regime).
  int k = 10;
  double beta = 1.0;
  double lambda = 1e-3;
  int m = 2;
  double kernel_scale_factor = 0.2;  // exponential kernel, scale = factor * diameter
  HalfmoonConfig moons;
  int test_points = 512;
  std::vector<double> gamma_grid = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  double val_fraction = 0.2;
};

struct RateGridResult {
  RateFit downstream_axis;   // error vs n_down at anchor_n_pre
  RateFit pretraining_axis;  // error vs n_pre at anchor_n_down
  bool saturation_detected = false;
  double saturation_gap_sigmas = 0.0;
  double runtime_seconds = 0.0;
};

namespace detail {

struct DownCell {
  int n_pre = 0, n_down = 0, pre_trial = 0, down_trial = 0;
  std::uint64_t seed = 0;
  double excess = 0.0;
  double err01 = 0.0;
  double bayes01 = 0.0;
};

/// Fit a probe with gamma tuned on a validation split, refit on everything.
inline RidgeProbe tuned_probe(const Mat& psi, const Mat& y, const std::vector<double>& gammas,
                              double val_fraction, Rng& rng) {
  const long n = psi.rows();
  const long nval = std::max<long>(4, static_cast<long>(val_fraction * n));
  if (n < 2 * nval || gammas.size() == 1) return fit_probe(psi, y, gammas[gammas.size() / 2]);
  std::vector<int> perm = rng.sample_without_replacement(static_cast<int>(n), static_cast<int>(n));
  Mat psi_tr(n - nval, psi.cols()), y_tr(n - nval, y.cols());
  Mat psi_val(nval, psi.cols()), y_val(nval, y.cols());
  for (long i = 0; i < n - nval; ++i) {
    psi_tr.row(i) = psi.row(perm[i]);
    y_tr.row(i) = y.row(perm[i]);
  }
  for (long i = 0; i < nval; ++i) {
    psi_val.row(i) = psi.row(perm[n - nval + i]);
    y_val.row(i) = y.row(perm[n - nval + i]);
  }
  double best_gamma = gammas[0];
  double best_mse = std::numeric_limits<double>::infinity();
  for (double g : gammas) {
    const RidgeProbe p = fit_probe(psi_tr, y_tr, g);
    const double mse = excess_risk(p, psi_val, y_val);
    if (mse < best_mse) {
      best_mse = mse;
      best_gamma = g;
    }
  }
  return fit_probe(psi, y, best_gamma);
}

}  // namespace detail

inline RateGridResult run_rate_grid(const RateGridConfig& cfg, std::uint64_t master_seed,
                                    int threads, const std::filesystem::path& out_dir) {
  const auto t_start = std::chrono::steady_clock::now();
  require(cfg.n_pre_grid.size() >= 4 && cfg.n_down_grid.size() >= 4,
          "run_rate_grid: grids need >= 4 points");
  require(cfg.pre_trials * cfg.down_trials_per_pre >= 4, "run_rate_grid: too few trials");

  // Downstream cells needed for each pretraining size.
  std::map<int, std::vector<int>> cells;
  for (int n_pre : cfg.n_pre_grid) cells[n_pre].push_back(cfg.anchor_n_down);
  for (int n_down : cfg.n_down_grid) {
    cells[cfg.anchor_n_pre].push_back(n_down);
    cells[cfg.saturation_n_pre].push_back(n_down);
  }
  for (auto& [n_pre, downs] : cells) {
    std::sort(downs.begin(), downs.end());
    downs.erase(std::unique(downs.begin(), downs.end()), downs.end());
  }

  struct Job {
    int n_pre = 0, trial = 0;
    const std::vector<int>* downs = nullptr;
  };
  std::vector<Job> jobs;
  for (const auto& [n_pre, downs] : cells)
    for (int trial = 0; trial < cfg.pre_trials; ++trial) jobs.push_back({n_pre, trial, &downs});
  std::vector<std::vector<detail::DownCell>> results(jobs.size());

  parallel_for(static_cast<int>(jobs.size()), threads, [&](int j) {
    const Job& job = jobs[j];
    Rng pre_rng(derive_seed(master_seed, {1, static_cast<std::uint64_t>(job.n_pre),
                                          static_cast<std::uint64_t>(job.trial)}));
    const HalfmoonSample pre = gen_halfmoon(job.n_pre, cfg.m, cfg.moons, pre_rng);
    const double diameter = dataset_diameter(pre.data.inputs);
    const KernelSpec spec = KernelSpec::exponential(std::max(1e-6, cfg.kernel_scale_factor * diameter));
    FitOptions opt;
    opt.k = cfg.k;
    opt.beta = cfg.beta;
    opt.lambda = cfg.lambda;
    opt.residual_tol = 1e-9;  // statistical workload, machine precision not needed
    opt.quiet = true;
    const RepresentationModel model = fit_representation(pre.data, spec, opt);

    auto& out = results[j];
    for (int n_down : *job.downs) {
      for (int dtrial = 0; dtrial < cfg.down_trials_per_pre; ++dtrial) {
        const std::uint64_t dseed =
            derive_seed(master_seed, {2, static_cast<std::uint64_t>(job.n_pre),
                                      static_cast<std::uint64_t>(job.trial),
                                      static_cast<std::uint64_t>(n_down),
                                      static_cast<std::uint64_t>(dtrial)});
        Rng down_rng(dseed);
        const HalfmoonSample train = gen_halfmoon(n_down, 1, cfg.moons, down_rng);
        const HalfmoonSample test = gen_halfmoon(cfg.test_points, 1, cfg.moons, down_rng);
        const Mat psi_train = model.evaluate_rows(train.data.inputs);
        const Mat psi_test = model.evaluate_rows(test.data.inputs);
        const Mat y_train = one_hot(train.labels, 4);
        const RidgeProbe probe =
            detail::tuned_probe(psi_train, y_train, cfg.gamma_grid, cfg.val_fraction, down_rng);
        const Mat pred = probe_predict(probe, psi_test);
        detail::DownCell cell;
        cell.n_pre = job.n_pre;
        cell.n_down = n_down;
        cell.pre_trial = job.trial;
        cell.down_trial = dtrial;
        cell.seed = dseed;
        cell.excess = (pred - test.cond_probs).squaredNorm() / static_cast<double>(pred.rows());
        double wrong = 0.0, bayes_wrong = 0.0;
        for (long i = 0; i < pred.rows(); ++i) {
          int arg = 0, bayes_arg = 0;
          for (int c = 1; c < 4; ++c) {
            if (pred(i, c) > pred(i, arg)) arg = c;
            if (test.cond_probs(i, c) > test.cond_probs(i, bayes_arg)) bayes_arg = c;
          }
          wrong += arg != test.labels[i];
          bayes_wrong += bayes_arg != test.labels[i];
        }
        cell.err01 = wrong / static_cast<double>(pred.rows());
        cell.bayes01 = bayes_wrong / static_cast<double>(pred.rows());
        out.push_back(cell);
      }
    }
  });

  std::filesystem::create_directories(out_dir);
  CsvWriter csv(out_dir / "rate_grid_cells.csv",
                {"n_pre", "n_down", "pre_trial", "down_trial", "seed", "surrogate_excess",
                 "zero_one_error", "bayes_zero_one"});
  std::vector<std::pair<double, double>> down_axis, pre_axis;
  std::map<int, std::vector<double>> saturation_row;
  for (const auto& chunk : results)
    for (const auto& c : chunk) {
      csv.row({static_cast<long long>(c.n_pre), static_cast<long long>(c.n_down),
               static_cast<long long>(c.pre_trial), static_cast<long long>(c.down_trial),
               static_cast<long long>(c.seed), c.excess, c.err01, c.bayes01});
      if (c.n_pre == cfg.anchor_n_pre) down_axis.push_back({static_cast<double>(c.n_down), c.excess});
      if (c.n_down == cfg.anchor_n_down) pre_axis.push_back({static_cast<double>(c.n_pre), c.excess});
      if (c.n_pre == cfg.saturation_n_pre) saturation_row[c.n_down].push_back(c.excess);
    }

  RateGridResult res;
  res.downstream_axis = fit_slope(down_axis, 200, derive_seed(master_seed, {3}));
  res.pretraining_axis = fit_slope(pre_axis, 200, derive_seed(master_seed, {4}));

  // Saturation: the two largest n_down cells at the small pretraining size
  // agree within two trial standard deviations.
  {
    std::vector<int> downs;
    for (const auto& [nd, v] : saturation_row) downs.push_back(nd);
    std::sort(downs.begin(), downs.end());
    const auto stats = [&](int nd) {
      const auto& v = saturation_row[nd];
      double mean = 0.0;
      for (double e : v) mean += e;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double e : v) var += (e - mean) * (e - mean);
      var /= std::max<std::size_t>(1, v.size() - 1);
      return std::pair<double, double>{mean, std::sqrt(var)};
    };
    const auto [m1, sd1] = stats(downs[downs.size() - 2]);
    const auto [m2, sd2] = stats(downs[downs.size() - 1]);
    const double sd = std::sqrt(0.5 * (sd1 * sd1 + sd2 * sd2));
    res.saturation_gap_sigmas = sd > 0.0 ? std::abs(m1 - m2) / sd : 0.0;
    res.saturation_detected = std::abs(m1 - m2) <= 2.0 * sd;
  }

  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  nlohmann::json summary;
  summary["downstream_axis"] = {{"slope", res.downstream_axis.slope},
                                {"ci", {res.downstream_axis.ci_lo, res.downstream_axis.ci_hi}}};
  summary["pretraining_axis"] = {{"slope", res.pretraining_axis.slope},
                                 {"ci", {res.pretraining_axis.ci_lo, res.pretraining_axis.ci_hi}}};
  summary["saturation_detected"] = res.saturation_detected;
  summary["saturation_gap_sigmas"] = res.saturation_gap_sigmas;
  summary["runtime_seconds"] = res.runtime_seconds;
  summary["checks"] = {{"downstream_slope_in_window",
                        res.downstream_axis.slope >= -1.3 && res.downstream_axis.slope <= -0.7},
                       {"pretraining_slope_in_window",
                        res.pretraining_axis.slope >= -0.8 && res.pretraining_axis.slope <= -0.3},
                       {"saturation_detected", res.saturation_detected}};
  std::ofstream(out_dir / "rate_grid_summary.json") << summary.dump(2) << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// Lambda sweep on the sphere (two targets, invariant vs low degree)
// ---------------------------------------------------------------------------

struct LambdaSweepConfig {
  int n = 300;
  int d = 8;
  int k = 20;
  double beta = 1.0;
  std::vector<double> lambda_grid = {1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  int trials = 8;
  int test_points = 1500;
  // Keep only kernel directions above the finite-sample noise bulk (the
  // empirical spectrum gaps right after the ~156 harmonics of degree <= 3 at
  // n = 300); directions below it are sample artifacts, not functions.
  double pinv_tol_rel = 1e-3;
  std::vector<double> gamma_grid = {1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
  double val_fraction = 0.2;
};

struct LambdaSweepResult {
  // mean relative excess risk indexed by [lambda][target(0=f1,1=f3)]
  std::vector<std::array<double, 2>> mean_rel_excess;
  std::vector<double> lambdas;
  bool invariant_best_at_small_lambda = false;
  bool low_degree_improves_at_large_lambda = false;
  bool all_finite_and_bounded = false;
};

inline LambdaSweepResult run_lambda_sweep(const LambdaSweepConfig& cfg, std::uint64_t master_seed,
                                          int threads, const std::filesystem::path& out_dir) {
  require(cfg.lambda_grid.size() >= 3, "run_lambda_sweep: lambda grid too small");
  const double lo = *std::min_element(cfg.lambda_grid.begin(), cfg.lambda_grid.end());
  const double hi = *std::max_element(cfg.lambda_grid.begin(), cfg.lambda_grid.end());
  require(hi / lo >= 1e3 * (1.0 - 1e-9), "run_lambda_sweep: lambda grid must span >= 3 decades");

  const int cells = static_cast<int>(cfg.lambda_grid.size()) * cfg.trials;
  std::vector<std::array<double, 2>> rel(cells, {0.0, 0.0});

  parallel_for(cells, threads, [&](int idx) {
    const int li = idx / cfg.trials;
    const int trial = idx % cfg.trials;
    const double lambda = cfg.lambda_grid[li];
    Rng rng(derive_seed(master_seed, {11, static_cast<std::uint64_t>(trial)}));
    const SphereTask task = gen_sphere_task(cfg.n, cfg.d, rng);
    FitOptions opt;
    opt.k = cfg.k;
    opt.beta = cfg.beta;
    opt.lambda = lambda;
    opt.pinv_tol_rel = cfg.pinv_tol_rel;
    opt.quiet = true;
    const RepresentationModel model = fit_representation(task.data, KernelSpec::sphere_arccos(), opt);
    const Mat psi_train = model.evaluate_rows(task.data.inputs);
    Rng test_rng(derive_seed(master_seed, {12, static_cast<std::uint64_t>(trial)}));
    Mat test_points(cfg.test_points, cfg.d);
    for (int i = 0; i < cfg.test_points; ++i) test_points.row(i) = test_rng.sphere_vec(cfg.d).transpose();
    const Mat psi_test = model.evaluate_rows(test_points);
    const Mat y_test = sphere_targets(test_points);
    for (int target = 0; target < 2; ++target) {
      Rng tune_rng(derive_seed(master_seed, {13, static_cast<std::uint64_t>(trial),
                                             static_cast<std::uint64_t>(li),
                                             static_cast<std::uint64_t>(target)}));
      const Mat y_train = task.targets.col(target);
      const RidgeProbe probe =
          detail::tuned_probe(psi_train, y_train, cfg.gamma_grid, cfg.val_fraction, tune_rng);
      const double target_norm = y_test.col(target).squaredNorm() / cfg.test_points;
      rel[idx][target] = excess_risk(probe, psi_test, y_test.col(target), target_norm);
    }
  });

  std::filesystem::create_directories(out_dir);
  CsvWriter csv(out_dir / "lambda_sweep.csv",
                {"lambda", "trial", "rel_excess_f1", "rel_excess_f3"});
  LambdaSweepResult res;
  res.lambdas = cfg.lambda_grid;
  res.mean_rel_excess.assign(cfg.lambda_grid.size(), {0.0, 0.0});
  for (int li = 0; li < static_cast<int>(cfg.lambda_grid.size()); ++li) {
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const int idx = li * cfg.trials + trial;
      csv.row({cfg.lambda_grid[li], static_cast<long long>(trial), rel[idx][0], rel[idx][1]});
      res.mean_rel_excess[li][0] += rel[idx][0] / cfg.trials;
      res.mean_rel_excess[li][1] += rel[idx][1] / cfg.trials;
    }
  }

  int li_min = 0, li_max = 0;
  for (int li = 0; li < static_cast<int>(cfg.lambda_grid.size()); ++li) {
    if (cfg.lambda_grid[li] < cfg.lambda_grid[li_min]) li_min = li;
    if (cfg.lambda_grid[li] > cfg.lambda_grid[li_max]) li_max = li;
  }
  res.invariant_best_at_small_lambda =
      res.mean_rel_excess[li_min][1] < res.mean_rel_excess[li_min][0];
  res.low_degree_improves_at_large_lambda =
      res.mean_rel_excess[li_max][0] <= 0.5 * res.mean_rel_excess[li_min][0];
  res.all_finite_and_bounded = true;
  for (const auto& pair : res.mean_rel_excess)
    for (double v : pair)
      if (!std::isfinite(v) || v > 1.5) res.all_finite_and_bounded = false;

  nlohmann::json summary;
  summary["lambdas"] = res.lambdas;
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& pair : res.mean_rel_excess) curves.push_back({pair[0], pair[1]});
  summary["mean_rel_excess_f1_f3"] = curves;
  summary["checks"] = {{"invariant_best_at_small_lambda", res.invariant_best_at_small_lambda},
                       {"low_degree_improves_at_large_lambda", res.low_degree_improves_at_large_lambda},
                       {"all_finite_and_bounded", res.all_finite_and_bounded}};
  std::ofstream(out_dir / "lambda_sweep_summary.json") << summary.dump(2) << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// Capacity demo (collapse at negligible regularization)
// ---------------------------------------------------------------------------

struct CapacityDemoConfig {
  int n = 30;
  int m = 2;
  double tiny_lambda = 1e-13;
  double moderate_lambda = 1e-3;
  double kernel_scale_factor = 0.2;  // Gaussian, a fraction of the diameter
  int k = 4;
  // At negligible lambda every function constant on one input's views sits in
  // a single near-degenerate eigenvalue cluster (the non-invariant family is
  // a spectral gap below); the canonical earliest-support tie-break resolves
  // the cluster into per-input indicators, exposing the collapse. The low
  // pseudo-inverse floor keeps each indicator representable.
  double tie_tol = 0.5;
  double collapse_pinv_tol = 1e-12;
  HalfmoonConfig moons;
};

struct CapacityDemoResult {
  double top_mass_fraction = 0.0;  // tiny lambda: mass on the heaviest input
  double sign_agreement = 0.0;     // moderate lambda: top nontrivial vs moons
  int nontrivial_index = -1;
};

inline CapacityDemoResult run_capacity_demo(const CapacityDemoConfig& cfg, std::uint64_t master_seed,
                                            int /*threads*/, const std::filesystem::path& out_dir) {
  Rng rng(derive_seed(master_seed, {21}));
  const HalfmoonSample sample = gen_halfmoon(cfg.n, cfg.m, cfg.moons, rng);
  const double diameter = dataset_diameter(sample.data.inputs);
  const KernelSpec spec = KernelSpec::gaussian(std::max(1e-6, cfg.kernel_scale_factor * diameter));

  FitOptions opt;
  opt.k = cfg.k;
  opt.beta = 1.0;
  opt.quiet = true;

  opt.lambda = cfg.tiny_lambda;
  opt.tie_tol = cfg.tie_tol;
  opt.pinv_tol_rel = cfg.collapse_pinv_tol;
  const RepresentationModel collapsed = fit_representation(sample.data, spec, opt);
  opt.lambda = cfg.moderate_lambda;
  opt.tie_tol = 0.0;
  opt.pinv_tol_rel = 1e-10;
  const RepresentationModel regular = fit_representation(sample.data, spec, opt);

  CapacityDemoResult res;
  {
    const Vec v = collapsed.anchor_values.col(0);
    const double total = v.squaredNorm();
    for (int i = 0; i < cfg.n; ++i) {
      const double mass = v.segment(static_cast<long>(i) * cfg.m, cfg.m).squaredNorm();
      res.top_mass_fraction = std::max(res.top_mass_fraction, mass / total);
    }
  }
  {
    // First component with a genuinely two-sided sign pattern (the constant
    // and its tilted variants have a lopsided one).
    const long nm = regular.anchor_values.rows();
    for (int c = 0; c < cfg.k; ++c) {
      const Vec v = regular.anchor_values.col(c);
      long pos = 0;
      for (long a = 0; a < nm; ++a) pos += v[a] >= 0.0;
      if (std::min(pos, nm - pos) < nm / 5) continue;
      res.nontrivial_index = c;
      double agree = 0.0;
      for (long a = 0; a < nm; ++a) {
        const int expect = sample.moon[static_cast<int>(a) / cfg.m] == 0 ? 1 : -1;
        agree += (v[a] >= 0.0 ? 1 : -1) == expect;
      }
      agree /= static_cast<double>(nm);
      res.sign_agreement = std::max(agree, 1.0 - agree);
      break;
    }
  }

  std::filesystem::create_directories(out_dir);
  CsvWriter csv(out_dir / "capacity_anchors.csv",
                {"anchor", "input", "moon", "x", "y", "collapsed_top", "regular_nontrivial"});
  const int nt = std::max(0, res.nontrivial_index);
  for (long a = 0; a < sample.data.views.rows(); ++a) {
    csv.row({static_cast<long long>(a), static_cast<long long>(a / cfg.m),
             static_cast<long long>(sample.moon[static_cast<int>(a) / cfg.m]),
             sample.data.views(a, 0), sample.data.views(a, 1), collapsed.anchor_values(a, 0),
             regular.anchor_values(a, nt)});
  }
  nlohmann::json summary;
  summary["top_mass_fraction"] = res.top_mass_fraction;
  summary["sign_agreement"] = res.sign_agreement;
  summary["nontrivial_index"] = res.nontrivial_index;
  summary["checks"] = {{"collapse_mass_ge_90", res.top_mass_fraction >= 0.9},
                       {"sign_agreement_ge_90", res.sign_agreement >= 0.9}};
  std::ofstream(out_dir / "capacity_summary.json") << summary.dump(2) << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// Interplay report (regime switches and the invariance x complexity grid)
// ---------------------------------------------------------------------------

struct InterplayConfig {
  int d = 12;
  int translate_width = 3;
  std::vector<double> lambda_grid = {0.0,  0.25, 0.5,  0.75, 1.0 - 1e-9, 1.0 + 1e-9,
                                     1.25, 1.5,  1.75, 2.0 - 1e-9, 2.0 + 1e-9, 2.5, 3.0};
  double beta = 1.0;
  int max_card = 8;
};

struct InterplayResult {
  double crossover_12 = 0.0;  // lambda where function 1 and 2 swap
  double crossover_23 = 0.0;
  bool switches_exact = false;
  bool monotone_path = true;
};

inline InterplayResult run_interplay_report(const InterplayConfig& cfg, std::uint64_t /*seed*/,
                                            int /*threads*/, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  // Three-eigenfunction regime table with the reference values
  // (t) = (.9, .75, .5) and (|theta|^2) = (.4, .25, .125), beta = 1.
  const double t_eigs[3] = {0.9, 0.75, 0.5};
  const double norms[3] = {0.4, 0.25, 0.125};
  InterplayResult res;
  res.crossover_12 = (t_eigs[0] - t_eigs[1]) / (norms[0] - norms[1]);
  res.crossover_23 = (t_eigs[1] - t_eigs[2]) / (norms[1] - norms[2]);
  res.switches_exact = res.crossover_12 == 1.0 && res.crossover_23 == 2.0;

  CsvWriter regimes(out_dir / "interplay_regimes.csv", {"lambda", "selected", "s1", "s2", "s3"});
  int prev = -1;
  for (double lam : cfg.lambda_grid) {
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    double scores[3];
    for (int i = 0; i < 3; ++i) {
      scores[i] = interplay_score(1.0, lam, t_eigs[i], 1.0 / norms[i]);
      if (scores[i] > best) {
        best = scores[i];
        arg = i;
      }
    }
    if (prev > arg) res.monotone_path = false;
    prev = arg;
    regimes.row({lam, static_cast<long long>(arg + 1), scores[0], scores[1], scores[2]});
  }

  // Invariance (frequency m) x complexity (cardinality) score grid for
  // window translations against the fully-connected ReLU NTK.
  const AugmentationLaw law = AugmentationLaw::translate_window(cfg.d, cfg.translate_width);
  const ScalarFn h = KernelSpec::dot_product(HName::ReluNtk, cfg.d).h_fn();
  CsvWriter grid(out_dir / "interplay_grid.csv",
                 {"freq", "card", "t_eig", "k_eig", "score_lambda_mid"});
  const double lam_mid = 0.5 * (cfg.lambda_grid.front() + cfg.lambda_grid.back());
  for (int card = 1; card <= std::min(cfg.max_card, cfg.d - 1); ++card) {
    std::uint32_t mask = 0;
    for (int i = 0; i < card; ++i) mask |= 1u << i;  // contiguous block, aperiodic
    const double nu = k_eig_dotproduct(h, cfg.d, card);
    for (int freq = 0; freq < cfg.d; ++freq) {
      const CyclicParity cp = CyclicParity::make(cfg.d, mask, freq);
      const double t = t_eig_translate(law.shift_probs, cp);
      grid.row({static_cast<long long>(freq), static_cast<long long>(card), t, nu,
                interplay_score(cfg.beta, lam_mid, t, nu)});
    }
  }

  nlohmann::json summary;
  summary["crossover_12"] = res.crossover_12;
  summary["crossover_23"] = res.crossover_23;
  summary["checks"] = {{"switches_exact", res.switches_exact},
                       {"monotone_selection_path", res.monotone_path}};
  std::ofstream(out_dir / "interplay_summary.json") << summary.dump(2) << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// Feature-space helpers shared by the SGD experiments
// ---------------------------------------------------------------------------

/// The dataset mapped through an explicit feature map, so the spectral path
/// on a linear kernel and the SGD path optimize over the same function space.
inline AugmentedDataset featurized_dataset(const AugmentedDataset& data, const FeatureMap& fm) {
  AugmentedDataset out;
  out.n = data.n;
  out.m = data.m;
  out.inputs = fm.map_rows(data.inputs);
  out.views = fm.map_rows(data.views);
  return out;
}

/// Small well-clustered 2-D dataset for the SGD consistency experiments.
inline AugmentedDataset make_cluster_toy(int n_inputs, int m, double noise, Rng& rng) {
  AugmentedDataset data;
  data.n = n_inputs;
  data.m = m;
  data.inputs.resize(n_inputs, 2);
  data.views.resize(static_cast<long>(n_inputs) * m, 2);
  for (int i = 0; i < n_inputs; ++i) {
    const double ang = 2.0 * M_PI * i / n_inputs;
    data.inputs(i, 0) = 2.0 * std::cos(ang);
    data.inputs(i, 1) = 2.0 * std::sin(ang);
    for (int j = 0; j < m; ++j) {
      data.views(static_cast<long>(i) * m + j, 0) = data.inputs(i, 0) + noise * rng.normal();
      data.views(static_cast<long>(i) * m + j, 1) = data.inputs(i, 1) + noise * rng.normal();
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Spectrum table and oracle equivalence (CLI verbs + acceptance reuse)
// ---------------------------------------------------------------------------

inline std::string mask_label(int d, std::uint32_t mask) {
  if (mask == 0) return "const";
  std::string out;
  for (int i = 0; i < d; ++i)
    if (mask >> i & 1u) {
      if (!out.empty()) out += ';';
      out += std::to_string(i);
    }
  return out;
}

struct SpectraTableConfig {
  int d = 8;
  double beta = 1.0;
  double lambda = 1e-2;
  double bitflip_p = 0.2;
  int crop_w = 3;
  double flip_p = 0.3;
  int translate_width = 3;
};

inline void run_spectra_table(const SpectraTableConfig& cfg, const std::filesystem::path& out_dir) {
  const ScalarFn h = KernelSpec::dot_product(HName::ReluNtk, cfg.d).h_fn();
  const std::vector<AugmentationLaw> laws = {
      AugmentationLaw::bit_flip(cfg.bitflip_p), AugmentationLaw::crop_1d(cfg.crop_w),
      AugmentationLaw::translate_window(cfg.d, cfg.translate_width),
      AugmentationLaw::index_flip(cfg.flip_p)};
  const auto rows = table1_report(cfg.d, laws, h, cfg.beta, cfg.lambda);
  std::filesystem::create_directories(out_dir);
  CsvWriter csv(out_dir / "spectra_table.csv",
                {"law", "label", "card", "diam", "component", "t_eig", "k_eig", "interplay", "class"});
  for (const auto& r : rows)
    csv.row({r.law, mask_label(cfg.d, r.mask), static_cast<long long>(r.card),
             static_cast<long long>(r.diam), r.component, r.t_eig, r.k_eig,
             std::isfinite(r.interplay) ? r.interplay : -1e300, r.qual});

  bool bitflip_monotone = true, crop_killed_ok = true, flip_split = false;
  std::vector<double> by_card(cfg.d + 1, 2.0);
  for (const auto& r : rows) {
    if (r.law.rfind("bit_flip", 0) == 0) by_card[r.card] = std::min(by_card[r.card], r.t_eig);
    if (r.law.rfind("crop_1d", 0) == 0 && ((r.diam > cfg.crop_w) != (r.qual == "killed")))
      crop_killed_ok = false;
    if (r.law.rfind("index_flip", 0) == 0 && r.component == "anti") flip_split = true;
  }
  for (int c = 1; c <= cfg.d; ++c)
    if (!(by_card[c] < by_card[c - 1])) bitflip_monotone = false;
  nlohmann::json summary;
  summary["checks"] = {{"bitflip_attenuates_higher_modes", bitflip_monotone},
                       {"crop_kills_wide_modes", crop_killed_ok},
                       {"flip_symmetry_split", flip_split}};
  std::ofstream(out_dir / "spectra_table_summary.json") << summary.dump(2) << '\n';
}

struct OracleCheckResult {
  double max_t_error = 0.0;        // closed form vs exhaustive operator
  double max_k_error = 0.0;
  double max_commute_error = 0.0;  // |TK - KT|_max over law x kernel pairs
  double spectral_range_excess = 0.0;
  double runtime_seconds = 0.0;
  bool all_ok(double tol_eig = 1e-9) const {
    return max_t_error <= tol_eig && max_k_error <= tol_eig && max_commute_error <= 1e-9 &&
           spectral_range_excess <= 1e-10;
  }
};

/// Closed-form eigenvalues against exhaustive operators at d = 8: bit flips,
/// crops, index flips, window translations, and the three reference kernels.
inline OracleCheckResult run_oracle_check(const std::filesystem::path& out_dir, int d = 8) {
  const auto t_start = std::chrono::steady_clock::now();
  OracleCheckResult res;
  std::filesystem::create_directories(out_dir);
  CsvWriter csv(out_dir / "oracle_checks.csv", {"operator", "case", "label", "analytic", "error"});

  const auto record_t = [&](const std::string& name, const Mat& op, const Vec& vec,
                            double analytic, const std::string& label) {
    const double err =
        std::max(std::abs(rayleigh(op, vec) - analytic), eigen_residual(op, vec, analytic));
    res.max_t_error = std::max(res.max_t_error, err);
    csv.row({std::string("T"), name, label, analytic, err});
  };

  std::vector<std::pair<std::string, Mat>> t_ops;
  for (double p : {0.0, 0.1, 0.25, 0.5}) {
    const AugmentationLaw law = AugmentationLaw::bit_flip(p);
    const Mat t = brute_force_T(law, d);
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask)
      record_t(law.name(), t, parity_vector(d, mask), t_eig_bitflip(p, ParitySubset{d, mask}),
               mask_label(d, mask));
    t_ops.push_back({law.name(), t});
  }
  for (int w : {2, 4, 8}) {
    const AugmentationLaw law = AugmentationLaw::crop_1d(w);
    const Mat t = brute_force_T(law, d);
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask)
      record_t(law.name(), t, parity_vector(d, mask), t_eig_crop1d(w, ParitySubset{d, mask}),
               mask_label(d, mask));
    t_ops.push_back({law.name(), t});
  }
  for (double p : {0.0, 0.3, 0.5}) {
    const AugmentationLaw law = AugmentationLaw::index_flip(p);
    const Mat t = brute_force_T(law, d);
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
      const std::uint32_t mir = mirror_mask(d, mask);
      if (mir < mask) continue;
      if (mir == mask) {
        record_t(law.name(), t, parity_vector(d, mask), 1.0, mask_label(d, mask));
      } else {
        const Vec chi = parity_vector(d, mask), chi_m = parity_vector(d, mir);
        record_t(law.name(), t, chi + chi_m, t_eig_indexflip(p, true), mask_label(d, mask) + "+sym");
        record_t(law.name(), t, chi - chi_m, t_eig_indexflip(p, false), mask_label(d, mask) + "+anti");
      }
    }
    t_ops.push_back({law.name(), t});
  }
  for (int width : {1, 3}) {
    const AugmentationLaw law = AugmentationLaw::translate_window(d, width);
    const Mat t = brute_force_T(law, d);
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
      const CyclicParity base = CyclicParity::make(d, mask, 0);
      if (base.rep != mask || base.orbit_size != d) continue;  // aperiodic orbit reps
      for (int m = 0; m < d; ++m) {
        const CyclicParity cp = CyclicParity::make(d, mask, m);
        const double analytic = t_eig_translate(law.shift_probs, cp);
        auto [re, im] = cyclic_parity_vectors(cp);
        record_t(law.name(), t, re, analytic, mask_label(d, mask) + "+m" + std::to_string(m));
        if (im.norm() > 1e-9)
          record_t(law.name(), t, im, analytic, mask_label(d, mask) + "+m" + std::to_string(m) + "i");
      }
    }
    t_ops.push_back({law.name() + "(w=" + std::to_string(width) + ")", t});
  }

  const std::vector<std::pair<std::string, ScalarFn>> kernels = {
      {"one", [](double) { return 1.0; }},
      {"linear", [](double t) { return t; }},
      {"relu_ntk", KernelSpec::dot_product(HName::ReluNtk, d).h_fn()}};
  std::vector<Mat> k_ops;
  for (const auto& [name, h] : kernels) {
    const Mat k = brute_force_K(h, d);
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
      const double analytic = k_eig_dotproduct(h, d, popcount32(mask));
      const Vec chi = parity_vector(d, mask);
      const double err =
          std::max(std::abs(rayleigh(k, chi) - analytic), eigen_residual(k, chi, analytic));
      res.max_k_error = std::max(res.max_k_error, err);
      csv.row({std::string("K"), name, mask_label(d, mask), analytic, err});
    }
    k_ops.push_back(k);
  }

  // spectral range and commutation on the exhaustive operators
  for (const auto& [name, t] : t_ops) {
    EigenSystem es = sym_eig_desc(t);
    res.spectral_range_excess = std::max(
        res.spectral_range_excess,
        std::max(es.values[0] - 1.0, -es.values[es.values.size() - 1]));
    for (const Mat& k : k_ops)
      res.max_commute_error = std::max(res.max_commute_error, max_abs(t * k - k * t));
  }

  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  nlohmann::json summary;
  summary["max_t_error"] = res.max_t_error;
  summary["max_k_error"] = res.max_k_error;
  summary["max_commute_error"] = res.max_commute_error;
  summary["spectral_range_excess"] = res.spectral_range_excess;
  summary["runtime_seconds"] = res.runtime_seconds;
  summary["checks"] = {{"oracle_equivalence", res.max_t_error <= 1e-9 && res.max_k_error <= 1e-9},
                       {"spectral_range", res.spectral_range_excess <= 1e-10},
                       {"commutation", res.max_commute_error <= 1e-9}};
  std::ofstream(out_dir / "oracle_summary.json") << summary.dump(2) << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// SGD training run (CLI verb)
// ---------------------------------------------------------------------------

struct SgdTrainConfig {
  int n = 20;
  int m = 4;
  double noise = 0.08;
  int landmarks = 16;
  double kernel_scale = 1.0;  // 0 -> diameter / 5
  SgdConfig sgd;
};

struct SgdTrainResult {
  double final_loss = 0.0;
  double spectral_loss = 0.0;  // closed form on the same features
  double hs_norm = 0.0;
  int rank = 0;
};

inline SgdTrainResult run_sgd_train(const SgdTrainConfig& cfg, std::uint64_t master_seed,
                                    const std::filesystem::path& out_dir) {
  Rng rng(derive_seed(master_seed, {31}));
  const AugmentedDataset data = make_cluster_toy(cfg.n, cfg.m, cfg.noise, rng);
  const double diameter = dataset_diameter(data.inputs);
  const double scale = cfg.kernel_scale > 0.0 ? cfg.kernel_scale : diameter / 5.0;
  Mat landmarks(std::min<long>(cfg.landmarks, data.views.rows()), 2);
  for (long i = 0; i < landmarks.rows(); ++i)
    landmarks.row(i) = data.views.row(i * data.views.rows() / landmarks.rows());
  const KernelSpec spec = KernelSpec::gaussian(scale);
  const FeatureMap fm = nystrom_features(spec, landmarks, default_jitter(spec, landmarks));

  SgdConfig sgd = cfg.sgd;
  sgd.seed = derive_seed(master_seed, {32});
  const SgdResult run = run_sgd(data, fm, sgd);

  std::filesystem::create_directories(out_dir);
  CsvWriter csv(out_dir / "sgd_trace.csv", {"step", "loss", "hs_norm", "rank"});
  for (const auto& row : run.trace)
    csv.row({static_cast<long long>(row.step), row.loss, row.hs_norm,
             static_cast<long long>(row.rank)});

  const PsdParam truncated = threshold_rank(run.param, sgd.k);
  const Mat theta = theta_factor(truncated, sgd.k);
  SgdTrainResult res;
  res.final_loss = empirical_loss(run.features * theta.transpose(), data.n, data.m, sgd.beta);
  res.hs_norm = run.param.hs_norm();
  EigenSystem es = sym_eig_desc(run.param.lambda_mat);
  for (int i = 0; i < es.values.size(); ++i)
    if (es.values[i] > 1e-10 * std::max(es.values[0], 0.0)) ++res.rank;

  const AugmentedDataset feat_data = featurized_dataset(data, fm);
  FitOptions opt;
  opt.k = sgd.k;
  opt.beta = sgd.beta;
  opt.lambda = sgd.lambda / 2.0;
  opt.quiet = true;
  const RepresentationModel spectral =
      fit_representation(feat_data, KernelSpec::dot_product(HName::Linear), opt);
  res.spectral_loss = empirical_loss(spectral.anchor_psi(), data.n, data.m, sgd.beta);

  nlohmann::json summary;
  summary["final_loss"] = res.final_loss;
  summary["spectral_loss"] = res.spectral_loss;
  summary["hs_norm"] = res.hs_norm;
  summary["rank"] = res.rank;
  std::ofstream(out_dir / "sgd_summary.json") << summary.dump(2) << '\n';
  return res;
}

}  // namespace kssl
