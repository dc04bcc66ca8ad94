#pragma once

#include <cmath>
#include <functional>
#include <string>

#include <json.hpp>

#include "kssl/linalg.hpp"
#include "kssl/rng.hpp"

namespace kssl {

using ScalarFn = std::function<double(double)>;

inline double clamp_unit(double u) { return std::min(1.0, std::max(-1.0, u)); }

/// kappa(u) = 1 - arccos(u)/pi, the arc-cosine angle factor.
inline double arccos_angle_factor(double u) { return 1.0 - std::acos(clamp_unit(u)) / M_PI; }

/// Closed form of the ReLU NTK scalar function on correlation t in [-1,1]:
/// E[relu'(a)relu'(b)] * t + E[relu(a)relu(b)] for unit-variance Gaussians
/// with correlation t.
inline double relu_ntk_h(double t) {
  const double u = clamp_unit(t);
  const double theta = std::acos(u);
  const double nngp = (std::sqrt(std::max(0.0, 1.0 - u * u)) + u * (M_PI - theta)) / (2.0 * M_PI);
  const double deriv = (M_PI - theta) / (2.0 * M_PI);
  return nngp + u * deriv;
}

// ---------------------------------------------------------------------------
// Activations (for the Monte-Carlo h estimator)
// ---------------------------------------------------------------------------

struct Activation {
  std::string name;
  ScalarFn f;
  ScalarFn df;  // derivative, defined almost everywhere
};

inline Activation identity_activation() {
  return {"identity", [](double z) { return z; }, [](double) { return 1.0; }};
}

inline Activation relu_activation() {
  return {"relu", [](double z) { return z > 0.0 ? z : 0.0; },
          [](double z) { return z > 0.0 ? 1.0 : 0.0; }};
}

inline Activation activation_by_name(const std::string& name) {
  if (name == "identity") return identity_activation();
  if (name == "relu") return relu_activation();
  throw input_error("unknown activation: " + name);
}

/// Monte-Carlo estimate of h(t) = E_w[ s(<u,w>/sqrt(q)) s(<v,w>/sqrt(q))
///   + s'(<u,w>/sqrt(q)) s'(<v,w>/sqrt(q)) <u,v>/q ]
/// with w standard Gaussian and u, v hypercube points at correlation
/// t = <u,v>/q. The projections (<u,w>/sqrt(q), <v,w>/sqrt(q)) form a
/// standard normal pair with correlation t, which is what gets sampled, so
/// any t in [-1,1] is valid. Deterministic given the seed.
inline double estimate_h(const Activation& act, int q, double t, long mc_samples,
                         std::uint64_t seed) {
  require(q >= 1, "estimate_h: q must be positive");
  require(mc_samples > 0, "estimate_h: mc_samples must be positive");
  require(t >= -1.0 && t <= 1.0, "estimate_h: t outside [-1,1]");
  Rng rng(seed);
  const double root = std::sqrt(std::max(0.0, 1.0 - t * t));
  double acc = 0.0;
  for (long s = 0; s < mc_samples; ++s) {
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    const double a = g1;
    const double b = t * g1 + root * g2;
    acc += act.f(a) * act.f(b) + act.df(a) * act.df(b) * t;
  }
  return acc / static_cast<double>(mc_samples);
}

// ---------------------------------------------------------------------------
// Kernel specifications
// ---------------------------------------------------------------------------

enum class KernelKind { Gaussian, Exponential, DotProduct, SphereArcCos };

/// Named scalar functions for serializable dot-product kernels.
enum class HName { One, Linear, ReluNtk };

struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  double scale = 1.0;        // Gaussian / Exponential length scale
  HName h = HName::Linear;   // DotProduct only
  int q = 1;                 // inner-product normalization for ReluNtk

  static KernelSpec gaussian(double scale) {
    require(scale > 0, "KernelSpec: scale must be positive");
    return {KernelKind::Gaussian, scale, HName::Linear, 1};
  }
  static KernelSpec exponential(double scale) {
    require(scale > 0, "KernelSpec: scale must be positive");
    return {KernelKind::Exponential, scale, HName::Linear, 1};
  }
  static KernelSpec dot_product(HName h, int q = 1) {
    require(q >= 1, "KernelSpec: q must be positive");
    return {KernelKind::DotProduct, 1.0, h, q};
  }
  static KernelSpec sphere_arccos() { return {KernelKind::SphereArcCos, 1.0, HName::Linear, 1}; }

  /// The scalar function t -> h(t) applied to raw inner products.
  ScalarFn h_fn() const {
    switch (h) {
      case HName::One:
        return [](double) { return 1.0; };
      case HName::Linear:
        return [](double t) { return t; };
      case HName::ReluNtk: {
        const double qq = static_cast<double>(q);
        return [qq](double t) { return relu_ntk_h(t / qq); };
      }
    }
    throw input_error("KernelSpec: bad h");
  }
};

inline const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Gaussian: return "gaussian";
    case KernelKind::Exponential: return "exponential";
    case KernelKind::DotProduct: return "dot_product";
    case KernelKind::SphereArcCos: return "sphere_arccos";
  }
  return "?";
}

inline const char* h_name(HName h) {
  switch (h) {
    case HName::One: return "one";
    case HName::Linear: return "linear";
    case HName::ReluNtk: return "relu_ntk";
  }
  return "?";
}

inline nlohmann::json kernel_to_json(const KernelSpec& s) {
  return {{"kind", kernel_kind_name(s.kind)}, {"scale", s.scale}, {"activation", h_name(s.h)}, {"q", s.q}};
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
  KernelSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") s.kind = KernelKind::Gaussian;
  else if (kind == "exponential") s.kind = KernelKind::Exponential;
  else if (kind == "dot_product") s.kind = KernelKind::DotProduct;
  else if (kind == "sphere_arccos") s.kind = KernelKind::SphereArcCos;
  else throw input_error("kernel_from_json: unknown kind " + kind);
  s.scale = j.value("scale", 1.0);
  const std::string hn = j.value("activation", "linear");
  if (hn == "one") s.h = HName::One;
  else if (hn == "linear") s.h = HName::Linear;
  else if (hn == "relu_ntk") s.h = HName::ReluNtk;
  else throw input_error("kernel_from_json: unknown activation " + hn);
  s.q = j.value("q", 1);
  require(s.kind == KernelKind::DotProduct || s.scale > 0, "kernel_from_json: scale must be positive");
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation and Gram matrices
// ---------------------------------------------------------------------------

inline double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vec>& x,
                          const Eigen::Ref<const Vec>& y) {
  require(x.size() == y.size(), "eval_kernel: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::Gaussian: {
      const double d2 = (x - y).squaredNorm();
      return std::exp(-d2 / (2.0 * spec.scale * spec.scale));
    }
    case KernelKind::Exponential: {
      const double d = (x - y).norm();
      return std::exp(-d / spec.scale);
    }
    case KernelKind::DotProduct:
      return spec.h_fn()(x.dot(y));
    case KernelKind::SphereArcCos: {
      const double u = clamp_unit(x.dot(y));
      return (1.0 + u) * arccos_angle_factor(u);
    }
  }
  throw input_error("eval_kernel: bad kind");
}

struct GramMatrix {
  Mat entries;
  double jitter = 0.0;
  int point_count = 0;
};

inline Mat cross_gram(const KernelSpec& spec, const Mat& a, const Mat& b);  // defined below

/// Symmetric kernel matrix over the rows of `points`, with `jitter` added to
/// the diagonal.
inline GramMatrix gram(const KernelSpec& spec, const Mat& points, double jitter = 0.0) {
  const int n = static_cast<int>(points.rows());
  require(n >= 1, "gram: empty point list");
  GramMatrix g;
  g.jitter = jitter;
  g.point_count = n;
  g.entries = cross_gram(spec, points, points);
  g.entries = 0.5 * (g.entries + g.entries.transpose()).eval();
  g.entries.diagonal().array() += jitter;
  return g;
}

/// Kernel matrix between the rows of `a` and the rows of `b`, computed in
/// blocks from inner products so the distance math vectorizes.
inline Mat cross_gram(const KernelSpec& spec, const Mat& a, const Mat& b) {
  require(a.cols() == b.cols(), "cross_gram: dimension mismatch");
  const long rows = a.rows(), cols = b.rows();
  Mat k(rows, cols);
  const Vec b2 = b.rowwise().squaredNorm();
  const ScalarFn h = spec.kind == KernelKind::DotProduct ? spec.h_fn() : ScalarFn();
  const long block = std::max<long>(64, (1L << 22) / std::max<long>(1, cols));
  for (long r0 = 0; r0 < rows; r0 += block) {
    const long nb = std::min(block, rows - r0);
    const auto ablock = a.middleRows(r0, nb);
    Mat dots = ablock * b.transpose();
    switch (spec.kind) {
      case KernelKind::Gaussian: {
        const Vec a2 = ablock.rowwise().squaredNorm();
        Mat d2 = (-2.0 * dots).colwise() + a2;
        d2.rowwise() += b2.transpose();
        k.middleRows(r0, nb) =
            (d2.cwiseMax(0.0) / (-2.0 * spec.scale * spec.scale)).array().exp();
        break;
      }
      case KernelKind::Exponential: {
        const Vec a2 = ablock.rowwise().squaredNorm();
        Mat d2 = (-2.0 * dots).colwise() + a2;
        d2.rowwise() += b2.transpose();
        k.middleRows(r0, nb) = (d2.cwiseMax(0.0).cwiseSqrt() / -spec.scale).array().exp();
        break;
      }
      case KernelKind::DotProduct:
        k.middleRows(r0, nb) = dots.unaryExpr([&h](double t) { return h(t); });
        break;
      case KernelKind::SphereArcCos:
        k.middleRows(r0, nb) = dots.unaryExpr([](double t) {
          const double u = clamp_unit(t);
          return (1.0 + u) * arccos_angle_factor(u);
        });
        break;
    }
  }
  return k;
}

/// Default jitter floor: 1e-8 relative to the mean kernel diagonal.
inline double default_jitter(const KernelSpec& spec, const Mat& points) {
  double mean_diag = 0.0;
  for (int i = 0; i < points.rows(); ++i)
    mean_diag += eval_kernel(spec, points.row(i).transpose(), points.row(i).transpose());
  mean_diag /= std::max<int>(1, static_cast<int>(points.rows()));
  return 1e-8 * mean_diag;
}

// ---------------------------------------------------------------------------
// Nystrom feature maps
// ---------------------------------------------------------------------------

/// Explicit features reproducing the kernel on the landmark set:
/// feature(x) = (G + jitter I)^(-1/2) * (k(x, landmark_j))_j.
struct FeatureMap {
  KernelSpec spec;
  Mat landmarks;  // D x dim
  Mat whiten;     // D x D
  int dimension = 0;

  Vec operator()(const Eigen::Ref<const Vec>& x) const {
    Vec kx(landmarks.rows());
    for (int j = 0; j < landmarks.rows(); ++j)
      kx[j] = eval_kernel(spec, x, landmarks.row(j).transpose());
    return whiten * kx;
  }

  /// Features for each row of `points`, one row per point.
  Mat map_rows(const Mat& points) const {
    Mat kx = cross_gram(spec, points, landmarks);
    return kx * whiten.transpose();
  }
};

inline FeatureMap nystrom_features(const KernelSpec& spec, const Mat& landmarks, double jitter) {
  require(landmarks.rows() >= 1, "nystrom_features: need at least one landmark");
  GramMatrix g = gram(spec, landmarks, jitter);
  EigenSystem es = sym_eig_desc(g.entries);
  const double top = std::max(es.values[0], 0.0);
  const double floor = 1e-14 * top;
  const int d = static_cast<int>(es.values.size());
  if (top <= 0.0 || es.values[d - 1] <= floor) {
    std::ostringstream oss;
    oss << "nystrom_features: landmark Gram singular despite jitter (condition number "
        << condition_number(es.values) << ")";
    throw numeric_error(oss.str());
  }
  Mat w = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i)
    w.noalias() += (1.0 / std::sqrt(es.values[i])) * es.vectors.col(i) * es.vectors.col(i).transpose();
  FeatureMap fm;
  fm.spec = spec;
  fm.landmarks = landmarks;
  fm.whiten = w;
  fm.dimension = d;
  return fm;
}

}  // namespace kssl
