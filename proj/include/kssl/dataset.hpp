#pragma once

#include <vector>

#include "kssl/core.hpp"

namespace kssl {

/// n inputs with m augmented views each. View (i, j) sits in row i*m + j of
/// `views`; the parent of row a is a / m.
struct AugmentedDataset {
  Mat inputs;  // n x dim
  Mat views;   // (n*m) x dim
  int n = 0;
  int m = 0;

  int parent(int view_row) const { return view_row / m; }
  int view_count() const { return n * m; }

  void validate() const {
    require(n >= 1 && m >= 1, "AugmentedDataset: n, m must be >= 1");
    require(inputs.rows() == n, "AugmentedDataset: input count mismatch");
    require(views.rows() == static_cast<long>(n) * m, "AugmentedDataset: view grid not rectangular");
    require(inputs.cols() == views.cols(), "AugmentedDataset: dimension mismatch");
  }
};

struct LabeledDataset {
  Mat points;   // n x dim
  Mat targets;  // n x d_y  (one-hot rows for classification)
  std::vector<int> classes;  // optional class indices

  void validate() const {
    require(points.rows() == targets.rows(), "LabeledDataset: misaligned labels");
    require(points.allFinite() && targets.allFinite(), "LabeledDataset: non-finite values");
  }
};

inline Mat one_hot(const std::vector<int>& classes, int num_classes) {
  Mat y = Mat::Zero(static_cast<long>(classes.size()), num_classes);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    require(classes[i] >= 0 && classes[i] < num_classes, "one_hot: class index out of range");
    y(static_cast<long>(i), classes[i]) = 1.0;
  }
  return y;
}

}  // namespace kssl
