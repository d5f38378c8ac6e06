#include "pskit/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define PSKIT_HAVE_AVX2_BUILD 1
#endif

namespace pskit::kernels::avx2 {

#ifdef PSKIT_HAVE_AVX2_BUILD

bool available() { return __builtin_cpu_supports("avx2"); }

namespace {
inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  // lane order mirrors the scalar reference: (a0+a2) + (a1+a3) + tail
  double a0 = _mm_cvtsd_f64(lo);
  double a1 = _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
  double a2 = _mm_cvtsd_f64(hi);
  double a3 = _mm_cvtsd_f64(_mm_unpackhi_pd(hi, hi));
  return (a0 + a2) + (a1 + a3);
}
}  // namespace

double sum(std::span<const double> x) {
  std::size_t n = x.size(), i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x.data() + i));
  double tail = 0;
  for (; i < n; ++i) tail += x[i];
  return hsum(acc) + tail;
}

double dot(std::span<const double> x, std::span<const double> y) {
  std::size_t n = x.size(), i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x.data() + i);
    __m256d vy = _mm256_loadu_pd(y.data() + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(vx, vy));
  }
  double tail = 0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return hsum(acc) + tail;
}

double sumsq(std::span<const double> x) { return dot(x, x); }

double dot3(std::span<const double> x, std::span<const double> y,
            std::span<const double> w) {
  std::size_t n = x.size(), i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x.data() + i);
    __m256d vy = _mm256_loadu_pd(y.data() + i);
    __m256d vw = _mm256_loadu_pd(w.data() + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(vx, vy), vw));
  }
  double tail = 0;
  for (; i < n; ++i) tail += x[i] * y[i] * w[i];
  return hsum(acc) + tail;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  std::size_t n = x.size(), i = 0;
  __m256d va = _mm256_set1_pd(a);
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y.data() + i);
    __m256d vx = _mm256_loadu_pd(x.data() + i);
    _mm256_storeu_pd(y.data() + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

#else

bool available() { return false; }
double sum(std::span<const double> x) { return scalar::sum(x); }
double dot(std::span<const double> x, std::span<const double> y) {
  return scalar::dot(x, y);
}
double sumsq(std::span<const double> x) { return scalar::sumsq(x); }
double dot3(std::span<const double> x, std::span<const double> y,
            std::span<const double> w) {
  return scalar::dot3(x, y, w);
}
void axpy(double a, std::span<const double> x, std::span<double> y) {
  scalar::axpy(a, x, y);
}

#endif

}  // namespace pskit::kernels::avx2
