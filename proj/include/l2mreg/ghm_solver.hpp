#pragma once

#include "l2mreg/error.hpp"
#include "l2mreg/geometry.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace l2mreg {

enum class CorrespondenceKind { kFacade, kGround };

/// LiDAR points observed on one model plane: n·(R x + t) + d = 0.
struct Correspondence {
  PlaneParams model_plane;
  std::vector<Vec3> lidar_points;
  std::string wall_id;
  CorrespondenceKind kind = CorrespondenceKind::kFacade;
};

/// Coincident horizontal planes through the origin in both frames. Any
/// other values are rejected by validate().
struct PseudoPlanePair {
  Vec3 normal = Vec3::UnitZ();
  double offset_target = 0.0;
  double offset_source = 0.0;

  void validate() const;
};

/// (q0, q1, q2, q3, t_x, t_y, t_z).
using ParamVector = Eigen::Matrix<double, 7, 1>;

ParamVector to_params(const RigidTransform& t);
RigidTransform from_params(const ParamVector& x);

/// One condition row per LiDAR point, optionally followed by the
/// pseudo-plane row (A row e_tz, zero B row, zero misclosure at t_z = 0).
struct LinearizedSystem {
  Eigen::MatrixXd a;                              // rows x 7
  Eigen::Matrix<double, Eigen::Dynamic, 3> b;     // rows x 3, per-point block
  Eigen::Matrix<double, 1, 7> c;                  // quaternion-norm gradient
  Eigen::VectorXd w;                              // misclosure per row
  double wc = 0.0;                                // ||q|| - 1
  std::size_t point_rows = 0;
  bool pseudo_row = false;
};

/// Linearized at (x0, V = 0). Ground correspondences are skipped when the
/// pseudo-plane is included. Throws DegenerateGeometry for unobservable
/// horizontal geometry.
LinearizedSystem assemble_system(std::span<const Correspondence> correspondences,
                                 bool include_pseudo_plane, const ParamVector& x0);

struct SolverOptions {
  int max_iter = 50;
  double tol = 1e-10;
  bool include_pseudo_plane = true;
  /// Reference mode: solve for (q, t_x, t_y) only, t_z held at zero.
  bool omit_tz = false;
  unsigned workers = 1;
};

struct SolverReport {
  /// t_z forced to exactly zero when the pseudo-plane is on.
  RigidTransform transform;
  ParamVector params = ParamVector::Zero();
  double raw_t_z = 0.0;
  double variance_factor = 0.0;
  long redundancy = 0;
  /// Parallel to the correspondences used; RMS of corrected misclosures.
  std::vector<std::string> wall_ids;
  std::vector<double> rms_residual;
  int iterations = 0;
  bool converged = false;
  /// Sum of squared condition misclosures at the start of each iteration.
  std::vector<double> objective_history;
  /// Corrections to the LiDAR coordinates, in correspondence order.
  std::vector<Vec3> corrections;
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& message, SolverReport last)
      : Error(ErrorKind::kNoConvergence, message), last_(std::move(last)) {}
  const SolverReport& last_state() const noexcept { return last_; }

 private:
  SolverReport last_;
};

/// Iterated constrained Gauss-Helmert adjustment with identity observation
/// weights, starting from the identity transform unless `x0` is given.
SolverReport solve(std::span<const Correspondence> correspondences,
                   const SolverOptions& options = {});
SolverReport solve(std::span<const Correspondence> correspondences,
                   const SolverOptions& options, const ParamVector& x0);

/// Max relative deviation |analytic - fd| / max(1, |fd|) of the A, B and C
/// rows against central differences with step 1e-6.
double jacobian_check(const PlaneParams& plane, const Vec3& point,
                      const ParamVector& x0);

/// Analytic partial derivatives of one condition row.
struct ConditionRow {
  Eigen::Matrix<double, 1, 7> a;
  Eigen::Matrix<double, 1, 3> b;
  double f = 0.0;
};
ConditionRow condition_row(const PlaneParams& plane, const Vec3& point,
                           const ParamVector& x);

}  // namespace l2mreg
