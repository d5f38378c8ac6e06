#include "pskit/kernels.hpp"

#include <stdexcept>

namespace pskit::kernels {

namespace scalar {

// Four-accumulator blocking matches the AVX2 lane layout, so scalar and
// vector results coincide up to the final-rounding level.
double sum(std::span<const double> x) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t n = x.size(), i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += x[i];
    acc[1] += x[i + 1];
    acc[2] += x[i + 2];
    acc[3] += x[i + 3];
  }
  double tail = 0;
  for (; i < n; ++i) tail += x[i];
  return (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail;
}

double dot(std::span<const double> x, std::span<const double> y) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t n = x.size(), i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += x[i] * y[i];
    acc[1] += x[i + 1] * y[i + 1];
    acc[2] += x[i + 2] * y[i + 2];
    acc[3] += x[i + 3] * y[i + 3];
  }
  double tail = 0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail;
}

double sumsq(std::span<const double> x) { return dot(x, x); }

double dot3(std::span<const double> x, std::span<const double> y,
            std::span<const double> w) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t n = x.size(), i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += x[i] * y[i] * w[i];
    acc[1] += x[i + 1] * y[i + 1] * w[i + 1];
    acc[2] += x[i + 2] * y[i + 2] * w[i + 2];
    acc[3] += x[i + 3] * y[i + 3] * w[i + 3];
  }
  double tail = 0;
  for (; i < n; ++i) tail += x[i] * y[i] * w[i];
  return (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace scalar

namespace {

struct Dispatch {
  double (*sum)(std::span<const double>);
  double (*dot)(std::span<const double>, std::span<const double>);
  double (*sumsq)(std::span<const double>);
  double (*dot3)(std::span<const double>, std::span<const double>,
                 std::span<const double>);
  void (*axpy)(double, std::span<const double>, std::span<double>);
  std::string_view name;
};

constexpr Dispatch kScalar{scalar::sum, scalar::dot, scalar::sumsq,
                           scalar::dot3, scalar::axpy, "scalar"};
constexpr Dispatch kAvx2{avx2::sum, avx2::dot, avx2::sumsq, avx2::dot3,
                         avx2::axpy, "avx2"};

Dispatch pick_auto() { return avx2::available() ? kAvx2 : kScalar; }

Dispatch g_dispatch = pick_auto();

}  // namespace

double sum(std::span<const double> x) { return g_dispatch.sum(x); }
double dot(std::span<const double> x, std::span<const double> y) {
  return g_dispatch.dot(x, y);
}
double sumsq(std::span<const double> x) { return g_dispatch.sumsq(x); }
double dot3(std::span<const double> x, std::span<const double> y,
            std::span<const double> w) {
  return g_dispatch.dot3(x, y, w);
}
void axpy(double a, std::span<const double> x, std::span<double> y) {
  g_dispatch.axpy(a, x, y);
}

std::string_view active_backend() { return g_dispatch.name; }

void set_backend(std::string_view name) {
  if (name == "scalar") {
    g_dispatch = kScalar;
  } else if (name == "avx2") {
    if (!avx2::available()) throw std::runtime_error("avx2 not available");
    g_dispatch = kAvx2;
  } else if (name == "auto") {
    g_dispatch = pick_auto();
  } else {
    throw std::invalid_argument("unknown kernel backend");
  }
}

}  // namespace pskit::kernels
