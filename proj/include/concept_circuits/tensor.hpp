#pragma once

// Dense row-major matrices and the handful of kernels the transformer needs.
// Weights live in one flat parameter vector, so kernels take raw views into it.

#include <cstddef>
#include <span>
#include <vector>

namespace cc {

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

/// Read-only view of a row-major weight block inside the flat parameter vector.
struct WeightView {
  const double* p;
  int rows;
  int cols;
};

/// Writable view used for gradient accumulation.
struct GradView {
  double* p;
  int rows;
  int cols;
};

// out = x * W (+ bias). x: T x n, W: n x m.
void matmul(const Mat& x, WeightView w, const double* bias, Mat& out);
// out = x * W^T. x: T x m, W: n x m -> out T x n.
void matmul_transposed(const Mat& x, WeightView w, Mat& out);
// gw += x^T * dy. x: T x n, dy: T x m, gw: n x m.
void accumulate_outer(const Mat& x, const Mat& dy, GradView gw);
// gb += column sums of dy.
void accumulate_colsum(const Mat& dy, double* gb);

// In-place a += b.
void add_inplace(Mat& a, const Mat& b);

struct LayerNormCache {
  Mat xhat;
  std::vector<double> rstd;
};

inline constexpr double kLayerNormEps = 1e-5;

void layer_norm(const Mat& x, const double* gain, const double* bias, Mat& out, LayerNormCache& cache);
// Returns dx; accumulates gain/bias gradients when non-null.
void layer_norm_backward(const Mat& dy, const LayerNormCache& cache, const double* gain, double* dgain,
                         double* dbias, Mat& dx);

double gelu(double x);
double gelu_grad(double x);

}  // namespace cc
