#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pskit/rng.hpp"

namespace pskit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Spaces

enum class AssignmentKind { Binary, FiniteAtoms, Continuous };

struct BoxBounds {
  bool unbounded = true;
  Vec lo;
  Vec hi;
  bool contains(const Vec& v) const;
};

struct Spaces {
  int dX = 0;
  int dA = 1;
  int dY = 1;
  AssignmentKind assignment_kind = AssignmentKind::Continuous;
  std::vector<Vec> assignment_atoms;  // FiniteAtoms (Binary implies {0},{1})
  BoxBounds assignment_box;           // Continuous
  BoxBounds feature_domain;
  BoxBounds outcome_domain;

  std::vector<Vec> atoms() const;  // resolved atom list (Binary included)
  bool assignment_in_domain(const Vec& a) const;
};

// ---------------------------------------------------------------------------
// Noise

enum class DistKind { Gaussian, Uniform, Discrete };

struct DistSpec {
  DistKind kind = DistKind::Gaussian;
  // Gaussian
  Vec mean;
  Mat cov;
  // Uniform
  Vec lo;
  Vec hi;
  // Discrete
  std::vector<Vec> points;
  Vec probs;

  int dim() const;
  static DistSpec gaussian(Vec mean, Mat cov);
  static DistSpec uniform(Vec lo, Vec hi);
  static DistSpec discrete(std::vector<Vec> points, Vec probs);
  static DistSpec degenerate(int d);  // point mass at zero
};

enum class CrossDependence { FullyIndependent, VWCorrelated, Custom };

struct NoiseModel {
  DistSpec u;
  DistSpec v;
  DistSpec w;
  CrossDependence cross = CrossDependence::FullyIndependent;
  Mat vw_corr;    // VWCorrelated: cross-correlation of (V,W), dV x dW
  Mat joint_cov;  // Custom: joint Gaussian covariance over (U,V,W)
};

struct NoiseDraw {
  Vec u;
  Vec v;
  Vec w;
  std::uint64_t replication = 0;
  int t = 0;
};

// ---------------------------------------------------------------------------
// Structural components and the record

struct DataRecord {
  Vec x;
  Vec a;
  Vec y;
  int t = 0;
  Vec stacked() const;  // (x; a; y)
};

// History window, oldest first, most recent last.
using History = std::span<const DataRecord>;

struct SemComponents {
  std::function<Vec(History, const Vec& u)> chi;
  std::function<Vec(History, const Vec& x, const Vec& v)> alpha;
  std::function<Vec(History, const Vec& x, const Vec& a, const Vec& w)> gamma;
  int order = 1;  // m; 0 means no history dependence
};

struct SystemSpec {
  Spaces spaces;
  NoiseModel noise;
  SemComponents sem;
  int horizon_T = 1;
  // D_{1-m:0} padding, oldest first; defaulted to zeros when empty
  std::vector<DataRecord> initial_history;

  std::vector<DataRecord> padded_initial_history() const;
};

// ---------------------------------------------------------------------------
// Operations

struct Violation {
  std::string code;
  std::string message;
};

std::vector<Violation> validate_system(const SystemSpec& spec);

// Precomputes Cholesky factors etc. so the per-step draw is cheap. Pure and
// reusable across threads.
class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseModel& model);
  NoiseDraw draw(std::uint64_t seed, std::uint64_t replication, int t) const;

 private:
  NoiseModel model_;
  Mat chol_u_, chol_v_, chol_w_, chol_vw_, chol_joint_;
};

// Deterministic function of (spec.noise, seed, replication, t).
NoiseDraw draw_noise(const SystemSpec& spec, std::uint64_t seed,
                     std::uint64_t replication, int t);

// Evaluates (x, a, y) in triangular order; throws DomainViolation on any
// out-of-domain component output.
DataRecord step_dgp(const SystemSpec& spec, History history,
                    const NoiseDraw& noise);

struct DomainViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trims a full history to the spec's m-order window.
History order_window(const SystemSpec& spec, History full);

}  // namespace pskit
