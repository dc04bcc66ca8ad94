#pragma once

#include <bit>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "kssl/kernels.hpp"
#include "kssl/linalg.hpp"

namespace kssl {

// ---------------------------------------------------------------------------
// Parity functions on the hypercube {-1,+1}^d.
// Points are encoded as bitmasks: bit i set  <=>  coordinate i equals -1.
// ---------------------------------------------------------------------------

inline int popcount32(std::uint32_t x) { return std::popcount(x); }

struct ParitySubset {
  int d = 0;
  std::uint32_t mask = 0;

  int card() const { return popcount32(mask); }

  /// Smallest cyclic window length covering the subset; 0 for the empty set.
  int cyclic_diam() const {
    if (mask == 0) return 0;
    int best = d;
    for (int a = 0; a < d; ++a) {
      if (!(mask >> a & 1u)) continue;
      int extent = 0;
      for (int i = 0; i < d; ++i)
        if (mask >> i & 1u) extent = std::max(extent, (i - a + d) % d);
      best = std::min(best, extent + 1);
    }
    return best;
  }

  double chi(std::uint32_t point) const { return (popcount32(mask & point) & 1) ? -1.0 : 1.0; }
};

inline std::uint32_t shift_mask(int d, std::uint32_t mask, int a) {
  a = ((a % d) + d) % d;
  std::uint32_t out = 0;
  for (int i = 0; i < d; ++i)
    if (mask >> i & 1u) out |= 1u << ((i + a) % d);
  return out;
}

inline std::uint32_t mirror_mask(int d, std::uint32_t mask) {
  std::uint32_t out = 0;
  for (int i = 0; i < d; ++i)
    if (mask >> i & 1u) out |= 1u << ((d - i) % d);
  return out;
}

/// Number of cyclic windows [a, a+w) containing the subset. Exact count; this
/// equals (1 + w - diam(S))_+ in the generic case but also covers w = d and
/// subsets with several minimal covering arcs.
inline int window_count(int d, int w, std::uint32_t mask) {
  if (mask == 0) return d;
  int count = 0;
  for (int a = 0; a < d; ++a) {
    bool inside = true;
    for (int i = 0; i < d && inside; ++i)
      if (mask >> i & 1u) inside = ((i - a + d) % d) < w;
    count += inside;
  }
  return count;
}

/// chi_S evaluated at every point of the cube, as a length-2^d vector.
inline Vec parity_vector(int d, std::uint32_t mask) {
  const long n = 1L << d;
  Vec v(n);
  for (long x = 0; x < n; ++x)
    v[x] = (popcount32(mask & static_cast<std::uint32_t>(x)) & 1) ? -1.0 : 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Cyclic parities (discrete Fourier combinations of a translation orbit)
// ---------------------------------------------------------------------------

struct CyclicParity {
  int d = 0;
  std::uint32_t rep = 0;  // orbit representative (smallest mask in the orbit)
  int freq = 0;           // m in [0, orbit_size)
  int orbit_size = 0;

  static CyclicParity make(int d, std::uint32_t mask, int freq) {
    CyclicParity cp;
    cp.d = d;
    std::uint32_t best = mask;
    int period = d;
    for (int a = 1; a < d; ++a) {
      const std::uint32_t s = shift_mask(d, mask, a);
      best = std::min(best, s);
      if (s == mask && a < period) period = a;
    }
    cp.rep = best;
    cp.orbit_size = period;
    cp.freq = ((freq % period) + period) % period;
    return cp;
  }
};

/// psi_{m,S}(x) = (1/sqrt(k_S)) sum_k exp(2 i pi k m / k_S) chi_{S+k}(x),
/// returned as (real, imaginary) vectors over the 2^d cube points.
inline std::pair<Vec, Vec> cyclic_parity_vectors(const CyclicParity& cp) {
  const long n = 1L << cp.d;
  Vec re = Vec::Zero(n), im = Vec::Zero(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(cp.orbit_size));
  for (int k = 0; k < cp.orbit_size; ++k) {
    const double ang = 2.0 * M_PI * k * cp.freq / cp.orbit_size;
    const Vec chi = parity_vector(cp.d, shift_mask(cp.d, cp.rep, k));
    re += std::cos(ang) * norm * chi;
    im += std::sin(ang) * norm * chi;
  }
  return {re, im};
}

// ---------------------------------------------------------------------------
// Augmentation laws and closed-form T eigenvalues
// ---------------------------------------------------------------------------

struct AugmentationLaw {
  enum class Kind { Identity, BitFlip, Crop1D, Crop2D, Translate, IndexFlip };
  Kind kind = Kind::Identity;
  double p = 0.0;
  int w = 1;
  int v = 1;
  int grid_rows = 1, grid_cols = 1;
  std::vector<double> shift_probs;

  static AugmentationLaw identity() { return {}; }
  static AugmentationLaw bit_flip(double p) {
    require(p >= 0.0 && p <= 1.0, "bit_flip: p outside [0,1]");
    AugmentationLaw l;
    l.kind = Kind::BitFlip;
    l.p = p;
    return l;
  }
  static AugmentationLaw crop_1d(int w) {
    require(w >= 1, "crop_1d: window must be >= 1");
    AugmentationLaw l;
    l.kind = Kind::Crop1D;
    l.w = w;
    return l;
  }
  static AugmentationLaw crop_2d(int v, int w, int rows, int cols) {
    require(v >= 1 && w >= 1 && rows >= 1 && cols >= 1, "crop_2d: bad window or grid");
    require(v <= rows && w <= cols, "crop_2d: window exceeds grid");
    AugmentationLaw l;
    l.kind = Kind::Crop2D;
    l.v = v;
    l.w = w;
    l.grid_rows = rows;
    l.grid_cols = cols;
    return l;
  }
  static AugmentationLaw translate(std::vector<double> probs) {
    double sum = 0.0;
    for (double q : probs) {
      require(q >= 0.0 && q <= 1.0, "translate: probabilities outside [0,1]");
      sum += q;
    }
    require(std::abs(sum - 1.0) <= 1e-12, "translate: probabilities must sum to 1");
    AugmentationLaw l;
    l.kind = Kind::Translate;
    l.shift_probs = std::move(probs);
    return l;
  }
  /// Uniform distribution over shifts {-(width-1)/2, ..., +(width-1)/2} mod d.
  static AugmentationLaw translate_window(int d, int width) {
    require(width >= 1 && width <= d, "translate_window: bad width");
    std::vector<double> probs(d, 0.0);
    const int lo = -(width - 1) / 2;
    for (int k = 0; k < width; ++k) probs[((lo + k) % d + d) % d] = 1.0 / width;
    return translate(std::move(probs));
  }
  static AugmentationLaw index_flip(double p) {
    require(p >= 0.0 && p <= 1.0, "index_flip: p outside [0,1]");
    AugmentationLaw l;
    l.kind = Kind::IndexFlip;
    l.p = p;
    return l;
  }

  std::string name() const {
    switch (kind) {
      case Kind::Identity: return "identity";
      case Kind::BitFlip: return "bit_flip(p=" + std::to_string(p) + ")";
      case Kind::Crop1D: return "crop_1d(w=" + std::to_string(w) + ")";
      case Kind::Crop2D:
        return "crop_2d(v=" + std::to_string(v) + ",w=" + std::to_string(w) + ")";
      case Kind::Translate: return "translate";
      case Kind::IndexFlip: return "index_flip(p=" + std::to_string(p) + ")";
    }
    return "?";
  }
};

/// T chi_S = |1-2p|^(2|S|) chi_S: each of the two independent views applies
/// one factor |1-2p|^|S| (T = A^T A).
inline double t_eig_bitflip(double p, const ParitySubset& s) {
  require(p >= 0.0 && p <= 1.0, "t_eig_bitflip: p outside [0,1]");
  const int c = s.card();
  if (c == 0) return 1.0;
  return std::pow(std::abs(1.0 - 2.0 * p), 2 * c);
}

inline double t_eig_crop1d(int w, const ParitySubset& s) {
  require(w >= 1 && w <= s.d, "t_eig_crop1d: window outside [1,d]");
  const double frac = static_cast<double>(window_count(s.d, w, s.mask)) / s.d;
  return frac * frac;
}

/// Projected window counts on an rows x cols grid; bit (i, j) = i + j*rows.
inline double t_eig_crop2d(int v, int w, int rows, int cols, std::uint32_t mask) {
  require(v >= 1 && v <= rows && w >= 1 && w <= cols, "t_eig_crop2d: windows outside grid");
  std::uint32_t row_mask = 0, col_mask = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (mask >> (i + j * rows) & 1u) {
        row_mask |= 1u << i;
        col_mask |= 1u << j;
      }
  const double fr = static_cast<double>(window_count(rows, v, row_mask)) / rows;
  const double fc = static_cast<double>(window_count(cols, w, col_mask)) / cols;
  return fr * fr * fc * fc;
}

inline std::complex<double> dft_coefficient(const std::vector<double>& probs, int omega) {
  const int d = static_cast<int>(probs.size());
  std::complex<double> acc(0.0, 0.0);
  for (int a = 0; a < d; ++a) {
    const double ang = -2.0 * M_PI * a * omega / d;
    acc += probs[a] * std::complex<double>(std::cos(ang), std::sin(ang));
  }
  return acc;
}

inline Mat brute_force_T(const AugmentationLaw& law, int d);  // defined below

/// |p_hat(m)|^2 for aperiodic orbits (k_S = d); periodic orbits fall back to
/// the exhaustive operator, reported through `used_brute_force`.
inline double t_eig_translate(const std::vector<double>& probs, const CyclicParity& cp,
                              bool* used_brute_force = nullptr) {
  require(static_cast<int>(probs.size()) == cp.d, "t_eig_translate: distribution size != d");
  if (used_brute_force) *used_brute_force = false;
  if (cp.orbit_size == cp.d) {
    const std::complex<double> ph = dft_coefficient(probs, cp.freq);
    return std::norm(ph);
  }
  if (used_brute_force) *used_brute_force = true;
  Mat t = brute_force_T(AugmentationLaw::translate(probs), cp.d);
  auto [re, im] = cyclic_parity_vectors(cp);
  const Vec& probe = re.squaredNorm() > 0.5 ? re : im;
  return probe.dot(t * probe) / probe.squaredNorm();
}

inline double t_eig_indexflip(double p, bool symmetric) {
  require(p >= 0.0 && p <= 1.0, "t_eig_indexflip: p outside [0,1]");
  if (symmetric) return 1.0;
  const double q = 1.0 - 2.0 * p;
  return q * q;
}

// ---------------------------------------------------------------------------
// Hypercube Gegenbauer (Krawtchouk) machinery
// ---------------------------------------------------------------------------

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

/// Q_{l,d}(t) with sum_{|S|=l} chi_S(x) chi_S(y) = C(d,l) Q_{l,d}(x.y),
/// evaluated by the Krawtchouk three-term recurrence (exact at integer t).
inline double gegenbauer_hypercube(int ell, int d, int t) {
  require(ell >= 0 && ell <= d, "gegenbauer_hypercube: ell outside [0,d]");
  require(std::abs(t) <= d && ((t + d) % 2 == 0), "gegenbauer_hypercube: t not reachable on the cube");
  double km1 = 1.0;  // K_0
  if (ell == 0) return 1.0;
  double k = static_cast<double>(t);  // K_1
  for (int l = 1; l < ell; ++l) {
    const double knext = (t * k - (d - l + 1) * km1) / (l + 1);
    km1 = k;
    k = knext;
  }
  return k / binomial(d, ell);
}

/// Probability of inner product t = d - 2b under uniform pairs, tau(b) = C(d,b)/2^d.
inline double hypercube_inner_weight(int d, int b) {
  return binomial(d, b) * std::pow(0.5, d);
}

/// nu_h(d, ell) = sum_t tau(t) h(t) Q_{ell,d}(t), exact binomial summation.
inline double k_eig_dotproduct(const ScalarFn& h, int d, int ell) {
  require(ell >= 0 && ell <= d, "k_eig_dotproduct: ell outside [0,d]");
  double acc = 0.0;
  for (int b = 0; b <= d; ++b) {
    const int t = d - 2 * b;
    acc += hypercube_inner_weight(d, b) * h(t) * gegenbauer_hypercube(ell, d, t);
  }
  return acc;
}

/// Eigenvalue of the 1-D convolutional kernel (patch width q) on chi_S:
/// nu_h(q,|S|) * count_q(S) / d, zero when no patch window covers S. The /d
/// normalization is pinned by the q = d degeneration to the dot-product
/// kernel and by the exhaustive operator oracle.
inline double k_eig_cnn(const ScalarFn& h_patch, int d, int q, const ParitySubset& s) {
  require(q >= 1 && q <= d, "k_eig_cnn: patch width outside [1,d]");
  const int count = window_count(d, q, s.mask);
  if (count == 0) return 0.0;
  return k_eig_dotproduct(h_patch, q, s.card()) * count / d;
}

// ---------------------------------------------------------------------------
// Sphere Gegenbauer machinery
// ---------------------------------------------------------------------------

/// Normalized Gegenbauer polynomial on S^{d-1} with Q_{l,d}(1) = 1.
inline double sphere_gegenbauer(int ell, int d, double t) {
  require(ell >= 0, "sphere_gegenbauer: ell must be >= 0");
  require(d >= 2, "sphere_gegenbauer: d must be >= 2");
  if (ell == 0) return 1.0;
  double pm1 = 1.0;
  double p = t;
  for (int l = 1; l < ell; ++l) {
    const double pnext = ((2.0 * l + d - 2.0) * t * p - l * pm1) / (l + d - 2.0);
    pm1 = p;
    p = pnext;
  }
  return p;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int l = 1; l < n; ++l) {
        const double p2 = ((2.0 * l + 1.0) * x * p1 - l * p0) / (l + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

/// Gegenbauer coefficient on the sphere by quadrature against the weight
/// (1-t^2)^((d-3)/2), normalized so h == 1 gives nu_0 = 1. Runs two node
/// counts and reports non-convergence.
inline double k_eig_sphere(const ScalarFn& h, int d, int ell, int quadrature_nodes = 128) {
  require(ell >= 0, "k_eig_sphere: ell must be >= 0");
  require(d >= 3, "k_eig_sphere: d must be >= 3");
  require(quadrature_nodes >= 64, "k_eig_sphere: need >= 64 nodes");
  auto eval = [&](int n) {
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    const double expo = 0.5 * (d - 3);
    double z = 0.0, acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double weight = w[i] * std::pow(1.0 - x[i] * x[i], expo);
      z += weight;
      acc += weight * h(x[i]) * sphere_gegenbauer(ell, d, x[i]);
    }
    return acc / z;
  };
  const double coarse = eval(quadrature_nodes);
  const double fine = eval(quadrature_nodes * 2);
  if (std::abs(coarse - fine) > 1e-6) {
    std::ostringstream oss;
    oss << "k_eig_sphere: quadrature did not converge (|" << coarse << " - " << fine << "| > 1e-6)";
    throw numeric_error(oss.str());
  }
  return fine;
}

/// Dimension of the space of degree-ell spherical harmonics on S^{d-1}.
inline double harmonic_dimension(int d, int ell) {
  require(d >= 2 && ell >= 0, "harmonic_dimension: bad arguments");
  if (ell == 0) return 1.0;
  return (2.0 * ell + d - 2.0) / ell * binomial(ell + d - 3, d - 2);
}

// ---------------------------------------------------------------------------
// Interplay score
// ---------------------------------------------------------------------------

/// beta * t_eig + (1 - beta) - lambda / k_eig; -inf when the eigenfunction
/// lies outside the function space (k_eig = 0).
inline double interplay_score(double beta, double lambda, double t_eig, double k_eig) {
  if (k_eig <= 0.0) return -std::numeric_limits<double>::infinity();
  return beta * t_eig + (1.0 - beta) - lambda / k_eig;
}

// ---------------------------------------------------------------------------
// Brute-force operators (exhaustive oracles, d <= 12)
// ---------------------------------------------------------------------------

namespace detail {

inline void check_cube_size(int d) {
  require(d >= 1, "brute force: d must be >= 1");
  if (d > 12) throw resource_error("brute force operators limited to d <= 12");
}

/// Markov matrix A[x][xi] = P(view = xi | input = x).
inline Mat augmentation_markov(const AugmentationLaw& law, int d) {
  check_cube_size(d);
  const long n = 1L << d;
  Mat a = Mat::Zero(n, n);
  switch (law.kind) {
    case AugmentationLaw::Kind::Identity:
      a.setIdentity();
      break;
    case AugmentationLaw::Kind::BitFlip: {
      std::vector<double> pw(d + 1);
      for (int h = 0; h <= d; ++h)
        pw[h] = std::pow(law.p, h) * std::pow(1.0 - law.p, d - h);
      for (long x = 0; x < n; ++x)
        for (long xi = 0; xi < n; ++xi)
          a(x, xi) = pw[popcount32(static_cast<std::uint32_t>(x ^ xi))];
      break;
    }
    case AugmentationLaw::Kind::Crop1D: {
      require(law.w >= 1 && law.w <= d, "crop_1d: window outside [1,d]");
      const double base = 1.0 / d * std::pow(0.5, d - law.w);
      for (int start = 0; start < d; ++start) {
        std::uint32_t keep = 0;
        for (int k = 0; k < law.w; ++k) keep |= 1u << ((start + k) % d);
        const std::uint32_t comp = ~keep & static_cast<std::uint32_t>(n - 1);
        for (long x = 0; x < n; ++x) {
          const std::uint32_t fixed = static_cast<std::uint32_t>(x) & keep;
          std::uint32_t sub = 0;
          for (;;) {
            a(x, fixed | sub) += base;
            if (sub == comp) break;
            sub = (sub - comp) & comp;
          }
        }
      }
      break;
    }
    case AugmentationLaw::Kind::Crop2D: {
      const int rows = law.grid_rows, cols = law.grid_cols;
      require(rows * cols == d, "crop_2d: grid does not match bit count");
      const int area = law.v * law.w;
      const double base = 1.0 / (static_cast<double>(rows) * cols) * std::pow(0.5, d - area);
      for (int ra = 0; ra < rows; ++ra)
        for (int ca = 0; ca < cols; ++ca) {
          std::uint32_t keep = 0;
          for (int i = 0; i < law.v; ++i)
            for (int j = 0; j < law.w; ++j)
              keep |= 1u << (((ra + i) % rows) + ((ca + j) % cols) * rows);
          const std::uint32_t comp = ~keep & static_cast<std::uint32_t>(n - 1);
          for (long x = 0; x < n; ++x) {
            const std::uint32_t fixed = static_cast<std::uint32_t>(x) & keep;
            std::uint32_t sub = 0;
            for (;;) {
              a(x, fixed | sub) += base;
              if (sub == comp) break;
              sub = (sub - comp) & comp;
            }
          }
        }
      break;
    }
    case AugmentationLaw::Kind::Translate: {
      require(static_cast<int>(law.shift_probs.size()) == d, "translate: distribution size != d");
      for (int sh = 0; sh < d; ++sh) {
        if (law.shift_probs[sh] == 0.0) continue;
        for (long x = 0; x < n; ++x) {
          std::uint32_t xs = 0;
          for (int i = 0; i < d; ++i)
            if (x >> ((i - sh + d) % d) & 1) xs |= 1u << i;
          a(x, xs) += law.shift_probs[sh];
        }
      }
      break;
    }
    case AugmentationLaw::Kind::IndexFlip: {
      for (long x = 0; x < n; ++x) {
        std::uint32_t xr = 0;
        for (int i = 0; i < d; ++i)
          if (x >> i & 1) xr |= 1u << ((d - i) % d);
        a(x, x) += 1.0 - law.p;
        a(x, xr) += law.p;
      }
      break;
    }
  }
  return a;
}

}  // namespace detail

/// Exhaustive T = A^T A over the 2^d cube; symmetric with spectrum in [0,1].
inline Mat brute_force_T(const AugmentationLaw& law, int d) {
  const Mat a = detail::augmentation_markov(law, d);
  Mat t(a.cols(), a.cols());
  t.noalias() = a.transpose() * a;
  return symmetrized(t);
}

/// Exhaustive dot-product operator K[x][y] = h(<x,y>)/2^d.
inline Mat brute_force_K(const ScalarFn& h, int d) {
  detail::check_cube_size(d);
  const long n = 1L << d;
  std::vector<double> by_hamming(d + 1);
  for (int ham = 0; ham <= d; ++ham) by_hamming[ham] = h(d - 2.0 * ham) / static_cast<double>(n);
  Mat k(n, n);
  for (long x = 0; x < n; ++x)
    for (long y = 0; y < n; ++y)
      k(x, y) = by_hamming[popcount32(static_cast<std::uint32_t>(x ^ y))];
  return k;
}

/// Exhaustive convolutional operator with patch width q:
/// K[x][y] = (1/d) sum_k h_patch(<x_patch_k, y_patch_k>) / 2^d.
inline Mat brute_force_K_cnn(const ScalarFn& h_patch, int d, int q) {
  detail::check_cube_size(d);
  require(q >= 1 && q <= d, "brute_force_K_cnn: patch width outside [1,d]");
  const long n = 1L << d;
  std::vector<std::uint32_t> patches(d);
  for (int k = 0; k < d; ++k) {
    std::uint32_t m = 0;
    for (int j = 0; j < q; ++j) m |= 1u << ((k + j) % d);
    patches[k] = m;
  }
  std::vector<double> by_hamming(q + 1);
  for (int ham = 0; ham <= q; ++ham) by_hamming[ham] = h_patch(q - 2.0 * ham);
  Mat kmat(n, n);
  for (long x = 0; x < n; ++x)
    for (long y = 0; y < n; ++y) {
      const std::uint32_t diff = static_cast<std::uint32_t>(x ^ y);
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += by_hamming[popcount32(diff & patches[k])];
      kmat(x, y) = acc / (static_cast<double>(d) * n);
    }
  return kmat;
}

inline double rayleigh(const Mat& op, const Vec& v) { return v.dot(op * v) / v.squaredNorm(); }

inline double eigen_residual(const Mat& op, const Vec& v, double lambda) {
  return (op * v - lambda * v).cwiseAbs().maxCoeff() / std::max(1.0, v.cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------------------
// Spectrum report (machine-checkable version of the augmentation-effect table)
// ---------------------------------------------------------------------------

struct SpectrumEntry {
  std::string law;
  std::uint32_t mask = 0;
  int card = 0;
  int diam = 0;
  std::string component;  // "", "sym"/"anti", or frequency for translations
  double t_eig = 0.0;
  double k_eig = 0.0;
  double interplay = 0.0;
  std::string qual;  // invariant / attenuated / killed
};

inline std::string qualitative_class(double t_eig) {
  if (t_eig <= 1e-12) return "killed";
  if (t_eig >= 1.0 - 1e-12) return "invariant";
  return "attenuated";
}

/// Per-law eigenvalue table over all parities of the d-cube, with interplay
/// scores against a dot-product kernel h (beta, lambda fixed by the caller).
inline std::vector<SpectrumEntry> table1_report(int d, const std::vector<AugmentationLaw>& laws,
                                                const ScalarFn& h, double beta, double lambda) {
  detail::check_cube_size(d);
  std::vector<double> nu(d + 1);
  for (int ell = 0; ell <= d; ++ell) nu[ell] = k_eig_dotproduct(h, d, ell);
  std::vector<SpectrumEntry> rows;
  for (const auto& law : laws) {
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
      ParitySubset s{d, mask};
      SpectrumEntry e;
      e.law = law.name();
      e.mask = mask;
      e.card = s.card();
      e.diam = s.cyclic_diam();
      e.k_eig = nu[e.card];
      switch (law.kind) {
        case AugmentationLaw::Kind::Identity:
          e.t_eig = 1.0;
          rows.push_back(e);
          break;
        case AugmentationLaw::Kind::BitFlip:
          e.t_eig = t_eig_bitflip(law.p, s);
          rows.push_back(e);
          break;
        case AugmentationLaw::Kind::Crop1D:
          e.t_eig = t_eig_crop1d(law.w, s);
          rows.push_back(e);
          break;
        case AugmentationLaw::Kind::Crop2D:
          e.t_eig = t_eig_crop2d(law.v, law.w, law.grid_rows, law.grid_cols, mask);
          rows.push_back(e);
          break;
        case AugmentationLaw::Kind::Translate: {
          const CyclicParity cp = CyclicParity::make(d, mask, 0);
          if (cp.rep != mask) continue;  // one row per orbit representative
          for (int m = 0; m < cp.orbit_size; ++m) {
            SpectrumEntry em = e;
            em.component = "m=" + std::to_string(m);
            em.t_eig = t_eig_translate(law.shift_probs, CyclicParity::make(d, mask, m));
            em.interplay = interplay_score(beta, lambda, em.t_eig, em.k_eig);
            em.qual = qualitative_class(em.t_eig);
            rows.push_back(em);
          }
          continue;
        }
        case AugmentationLaw::Kind::IndexFlip: {
          const std::uint32_t mir = mirror_mask(d, mask);
          if (mir < mask) continue;  // one row per {S, mirror(S)} pair
          SpectrumEntry sym = e;
          sym.component = "sym";
          sym.t_eig = t_eig_indexflip(law.p, true);
          sym.interplay = interplay_score(beta, lambda, sym.t_eig, sym.k_eig);
          sym.qual = qualitative_class(sym.t_eig);
          rows.push_back(sym);
          if (mir != mask) {
            SpectrumEntry anti = e;
            anti.component = "anti";
            anti.t_eig = t_eig_indexflip(law.p, false);
            anti.interplay = interplay_score(beta, lambda, anti.t_eig, anti.k_eig);
            anti.qual = qualitative_class(anti.t_eig);
            rows.push_back(anti);
          }
          continue;
        }
      }
      if (!rows.empty() && rows.back().qual.empty()) {
        rows.back().interplay = interplay_score(beta, lambda, rows.back().t_eig, rows.back().k_eig);
        rows.back().qual = qualitative_class(rows.back().t_eig);
      }
    }
  }
  return rows;
}

}  // namespace kssl
