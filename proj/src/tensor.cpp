#include "concept_circuits/tensor.hpp"

#include <cmath>

namespace cc {

void matmul(const Mat& x, WeightView w, const double* bias, Mat& out) {
  const int t_len = x.rows;
  const int n = w.rows;
  const int m = w.cols;
  if (out.rows != t_len || out.cols != m) out = Mat(t_len, m);
  for (int t = 0; t < t_len; ++t) {
    double* o = out.row(t);
    if (bias) {
      for (int j = 0; j < m; ++j) o[j] = bias[j];
    } else {
      for (int j = 0; j < m; ++j) o[j] = 0.0;
    }
    const double* xr = x.row(t);
    for (int i = 0; i < n; ++i) {
      const double xi = xr[i];
      const double* wr = w.p + static_cast<std::size_t>(i) * m;
      for (int j = 0; j < m; ++j) o[j] += xi * wr[j];
    }
  }
}

void matmul_transposed(const Mat& x, WeightView w, Mat& out) {
  const int t_len = x.rows;
  const int n = w.rows;
  const int m = w.cols;
  if (out.rows != t_len || out.cols != n) out = Mat(t_len, n);
  for (int t = 0; t < t_len; ++t) {
    const double* xr = x.row(t);
    double* o = out.row(t);
    for (int i = 0; i < n; ++i) {
      const double* wr = w.p + static_cast<std::size_t>(i) * m;
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += xr[j] * wr[j];
      o[i] = s;
    }
  }
}

void accumulate_outer(const Mat& x, const Mat& dy, GradView gw) {
  const int m = gw.cols;
  for (int t = 0; t < x.rows; ++t) {
    const double* xr = x.row(t);
    const double* dr = dy.row(t);
    for (int i = 0; i < gw.rows; ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      double* g = gw.p + static_cast<std::size_t>(i) * m;
      for (int j = 0; j < m; ++j) g[j] += xi * dr[j];
    }
  }
}

void accumulate_colsum(const Mat& dy, double* gb) {
  for (int t = 0; t < dy.rows; ++t) {
    const double* dr = dy.row(t);
    for (int j = 0; j < dy.cols; ++j) gb[j] += dr[j];
  }
}

void add_inplace(Mat& a, const Mat& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void layer_norm(const Mat& x, const double* gain, const double* bias, Mat& out, LayerNormCache& cache) {
  const int d = x.cols;
  if (!out.same_shape(x)) out = Mat(x.rows, d);
  if (!cache.xhat.same_shape(x)) cache.xhat = Mat(x.rows, d);
  cache.rstd.assign(x.rows, 0.0);
  for (int t = 0; t < x.rows; ++t) {
    const double* xr = x.row(t);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= d;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd[t] = rstd;
    double* xh = cache.xhat.row(t);
    double* o = out.row(t);
    for (int j = 0; j < d; ++j) {
      xh[j] = (xr[j] - mean) * rstd;
      o[j] = xh[j] * gain[j] + bias[j];
    }
  }
}

void layer_norm_backward(const Mat& dy, const LayerNormCache& cache, const double* gain, double* dgain,
                         double* dbias, Mat& dx) {
  const int d = dy.cols;
  if (!dx.same_shape(dy)) dx = Mat(dy.rows, d);
  for (int t = 0; t < dy.rows; ++t) {
    const double* g = dy.row(t);
    const double* xh = cache.xhat.row(t);
    double mean_gx = 0.0;
    double mean_gx_xh = 0.0;
    for (int j = 0; j < d; ++j) {
      const double gx = g[j] * gain[j];
      mean_gx += gx;
      mean_gx_xh += gx * xh[j];
      if (dgain) dgain[j] += g[j] * xh[j];
      if (dbias) dbias[j] += g[j];
    }
    mean_gx /= d;
    mean_gx_xh /= d;
    double* o = dx.row(t);
    const double rstd = cache.rstd[t];
    for (int j = 0; j < d; ++j) o[j] = rstd * (g[j] * gain[j] - mean_gx - xh[j] * mean_gx_xh);
  }
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

double gelu(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}

}  // namespace cc
