#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Reduction kernels used in the estimation inner loops (panel moments, HAC
// accumulation, kernel-weight sums). Each has a scalar reference
// implementation and an AVX2 variant; dispatch is resolved once at startup
// from cpuid. Both variants accumulate in four lanes so results agree to
// rounding across implementations.

namespace pskit::kernels {

double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sumsq(std::span<const double> x);
// sum of x[i]*y[i]*w[i]
double dot3(std::span<const double> x, std::span<const double> y,
            std::span<const double> w);
// y += a*x
void axpy(double a, std::span<const double> x, std::span<double> y);

namespace scalar {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sumsq(std::span<const double> x);
double dot3(std::span<const double> x, std::span<const double> y,
            std::span<const double> w);
void axpy(double a, std::span<const double> x, std::span<double> y);
}  // namespace scalar

namespace avx2 {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sumsq(std::span<const double> x);
double dot3(std::span<const double> x, std::span<const double> y,
            std::span<const double> w);
void axpy(double a, std::span<const double> x, std::span<double> y);
bool available();
}  // namespace avx2

// "avx2" or "scalar"; which variant the top-level entry points call.
std::string_view active_backend();
// Force a backend for testing ("scalar", "avx2", "auto").
void set_backend(std::string_view name);

}  // namespace pskit::kernels
