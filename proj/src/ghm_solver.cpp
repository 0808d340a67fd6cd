#include "l2mreg/ghm_solver.hpp"

#include "l2mreg/parallel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace l2mreg {

namespace {

constexpr double kParallelDeg = 1.0;
constexpr double kMinZSpread = 0.1;
constexpr double kRankThreshold = 1e-10;
/// Row blocks for assembly. Fixed so sums do not depend on the worker count.
constexpr std::size_t kAssemblyChunks = 64;

using Row7 = Eigen::Matrix<double, 1, 7>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Vec7 = Eigen::Matrix<double, 7, 1>;

/// Partial derivatives of the homogeneous rotation matrix.
std::array<Mat3, 4> rotation_partials(double q0, double q1, double q2, double q3) {
  std::array<Mat3, 4> d;
  d[0] << q0, -q3, q2, q3, q0, -q1, -q2, q1, q0;
  d[1] << q1, q2, q3, q2, -q1, -q0, q3, q0, -q1;
  d[2] << -q2, q1, q0, q1, q2, q3, -q0, q3, -q2;
  d[3] << -q3, -q0, q1, q0, -q3, q2, q1, q2, q3;
  for (auto& m : d) m *= 2.0;
  return d;
}

Quaternion quat(const ParamVector& x) { return {x[0], x[1], x[2], x[3]}; }

std::vector<const Correspondence*> select(std::span<const Correspondence> all,
                                          bool include_pseudo_plane) {
  std::vector<const Correspondence*> out;
  for (const auto& c : all) {
    if (c.lidar_points.size() < 3) {
      throw Error(ErrorKind::kInvalidArgument, "correspondence needs at least 3 points",
                  c.wall_id);
    }
    if (std::abs(c.model_plane.normal.norm() - 1.0) > 1e-9) {
      throw Error(ErrorKind::kInvalidArgument, "model plane normal is not unit length",
                  c.wall_id);
    }
    if (include_pseudo_plane && c.kind == CorrespondenceKind::kGround) continue;
    out.push_back(&c);
  }
  return out;
}

void check_geometry(const std::vector<const Correspondence*>& used) {
  if (used.size() < 2) {
    throw Error(ErrorKind::kDegenerateGeometry, "at least two plane correspondences needed");
  }
  struct Extent {
    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::lowest();
  };
  std::vector<Extent> ext(used.size());
  for (std::size_t i = 0; i < used.size(); ++i) {
    for (const auto& p : used[i]->lidar_points) {
      ext[i].lo = std::min(ext[i].lo, p.z());
      ext[i].hi = std::max(ext[i].hi, p.z());
    }
  }
  bool non_parallel = false;
  for (std::size_t i = 0; i < used.size(); ++i) {
    for (std::size_t j = i + 1; j < used.size(); ++j) {
      if (rotation_angle_between_normals(used[i]->model_plane.normal,
                                         used[j]->model_plane.normal) <= kParallelDeg) {
        continue;
      }
      non_parallel = true;
      const double spread =
          std::max(ext[i].hi, ext[j].hi) - std::min(ext[i].lo, ext[j].lo);
      if (spread >= kMinZSpread) return;
    }
  }
  throw Error(ErrorKind::kDegenerateGeometry,
              non_parallel ? "vertical extent of non-parallel walls below 0.1 m"
                           : "all model normals are parallel within 1 degree");
}

std::size_t total_points(const std::vector<const Correspondence*>& used) {
  std::size_t n = 0;
  for (const auto* c : used) n += c->lidar_points.size();
  return n;
}

}  // namespace

void PseudoPlanePair::validate() const {
  if (normal != Vec3::UnitZ() || offset_target != 0.0 || offset_source != 0.0) {
    throw Error(ErrorKind::kInvalidArgument,
                "pseudo-plane must be the horizontal plane z = 0 in both frames");
  }
}

ParamVector to_params(const RigidTransform& t) {
  ParamVector x;
  x << t.rotation.q0, t.rotation.q1, t.rotation.q2, t.rotation.q3, t.translation;
  return x;
}

RigidTransform from_params(const ParamVector& x) {
  return {quat(x), x.tail<3>()};
}

ConditionRow condition_row(const PlaneParams& plane, const Vec3& point,
                           const ParamVector& x) {
  const Quaternion q = quat(x);
  const Mat3 r = q.matrix();
  const auto d = rotation_partials(q.q0, q.q1, q.q2, q.q3);
  const Vec3& n = plane.normal;
  ConditionRow row;
  for (int k = 0; k < 4; ++k) row.a[k] = n.dot(d[k] * point);
  row.a.tail<3>() = n.transpose();
  row.b = n.transpose() * r;
  row.f = n.dot(r * point + x.tail<3>()) + plane.offset;
  return row;
}

LinearizedSystem assemble_system(std::span<const Correspondence> correspondences,
                                 bool include_pseudo_plane, const ParamVector& x0) {
  const auto used = select(correspondences, include_pseudo_plane);
  check_geometry(used);
  const std::size_t n = total_points(used);
  LinearizedSystem sys;
  sys.point_rows = n;
  sys.pseudo_row = include_pseudo_plane;
  const std::size_t rows = n + (include_pseudo_plane ? 1 : 0);
  sys.a.setZero(static_cast<Eigen::Index>(rows), 7);
  sys.b.setZero(static_cast<Eigen::Index>(rows), 3);
  sys.w.setZero(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  for (const auto* c : used) {
    for (const auto& p : c->lidar_points) {
      const ConditionRow row = condition_row(c->model_plane, p, x0);
      sys.a.row(r) = row.a;
      sys.b.row(r) = row.b;
      sys.w[r] = row.f;
      ++r;
    }
  }
  if (include_pseudo_plane) {
    sys.a(r, 6) = 1.0;
    sys.w[r] = x0[6];
  }
  const double qn = x0.head<4>().norm();
  sys.c.setZero();
  sys.c.head<4>() = x0.head<4>().transpose() / qn;
  sys.wc = qn - 1.0;
  return sys;
}

SolverReport solve(std::span<const Correspondence> correspondences,
                   const SolverOptions& options) {
  return solve(correspondences, options, to_params(RigidTransform::identity()));
}

SolverReport solve(std::span<const Correspondence> correspondences,
                   const SolverOptions& options, const ParamVector& x0) {
  const bool pseudo = options.include_pseudo_plane && !options.omit_tz;
  const bool drop_ground = options.include_pseudo_plane || options.omit_tz;
  const auto used = select(correspondences, drop_ground);
  check_geometry(used);
  const bool has_ground =
      std::any_of(used.begin(), used.end(),
                  [](const auto* c) { return c->kind == CorrespondenceKind::kGround; });
  if (!pseudo && !options.omit_tz && !has_ground) {
    throw Error(ErrorKind::kRankDeficient,
                "vertical translation is unobservable from facade planes alone");
  }

  // Flattened observations.
  std::vector<const PlaneParams*> plane_of;
  std::vector<Vec3> obs;
  for (const auto* c : used) {
    for (const auto& p : c->lidar_points) {
      plane_of.push_back(&c->model_plane);
      obs.push_back(p);
    }
  }
  const std::size_t n = obs.size();
  const int k = options.omit_tz ? 6 : 7;
  const int constraints = 1 + (pseudo ? 1 : 0);
  const int m = k + constraints;

  ParamVector x = x0;
  x.head<4>().normalize();
  if (options.omit_tz) x[6] = 0.0;
  std::vector<Vec3> v(n, Vec3::Zero());
  std::vector<Row7> a_rows(n);
  std::vector<Eigen::RowVector3d> b_rows(n);
  std::vector<double> w(n), p(n);

  SolverReport report;
  const auto chunks = split_range(n, kAssemblyChunks);
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    std::vector<Mat7> n_part(chunks.size(), Mat7::Zero());
    std::vector<Vec7> u_part(chunks.size(), Vec7::Zero());
    std::vector<double> obj_part(chunks.size(), 0.0);
    const Mat3 rx = quat(x).matrix();
    parallel_for(chunks.size(), options.workers, [&](std::size_t ci) {
      Mat7& nn = n_part[ci];
      Vec7& uu = u_part[ci];
      for (std::size_t j = chunks[ci].first; j < chunks[ci].second; ++j) {
        const ConditionRow row = condition_row(*plane_of[j], obs[j] + v[j], x);
        a_rows[j] = row.a;
        b_rows[j] = row.b;
        w[j] = row.f - row.b.dot(v[j].transpose());
        p[j] = 1.0 / row.b.squaredNorm();
        nn.noalias() += p[j] * row.a.transpose() * row.a;
        uu.noalias() += p[j] * w[j] * row.a.transpose();
        const double f0 = plane_of[j]->signed_distance(rx * obs[j] + x.tail<3>());
        obj_part[ci] += f0 * f0;
      }
    });
    Mat7 normal = Mat7::Zero();
    Vec7 u = Vec7::Zero();
    double objective = 0.0;
    for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
      normal += n_part[ci];
      u += u_part[ci];
      objective += obj_part[ci];
    }
    report.objective_history.push_back(objective);

    // Bordered system in Jacobi-scaled parameters.
    Eigen::VectorXd s(k);
    for (int i = 0; i < k; ++i) {
      s[i] = normal(i, i) > 0.0 ? 1.0 / std::sqrt(normal(i, i)) : 1.0;
    }
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) big(i, j) = s[i] * normal(i, j) * s[j];
      rhs[i] = -s[i] * u[i];
    }
    const double qn = x.head<4>().norm();
    for (int i = 0; i < 4; ++i) {
      big(k, i) = big(i, k) = s[i] * x[i] / qn;
    }
    rhs[k] = -(qn - 1.0);
    if (pseudo) {
      big(k + 1, 6) = big(6, k + 1) = s[6];
      rhs[k + 1] = -x[6];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(big);
    lu.setThreshold(kRankThreshold);
    if (lu.rank() < m) {
      throw Error(ErrorKind::kRankDeficient, "normal equations are rank deficient");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    Vec7 dx = Vec7::Zero();
    for (int i = 0; i < k; ++i) dx[i] = s[i] * sol[i];

    x += dx;
    x.head<4>().normalize();
    for (std::size_t j = 0; j < n; ++j) {
      const double lambda = p[j] * (a_rows[j].dot(dx) + w[j]);
      v[j] = -lambda * b_rows[j].transpose();
    }
    report.iterations = iter;
    if (dx.cwiseAbs().maxCoeff() < options.tol) {
      report.converged = true;
      break;
    }
  }

  report.raw_t_z = x[6];
  if (pseudo || options.omit_tz) x[6] = 0.0;
  if (x[0] < 0.0) x.head<4>() = -x.head<4>();
  report.params = x;
  report.transform = from_params(x);
  report.redundancy = static_cast<long>(n) + constraints - k;
  double vtv = 0.0;
  for (const auto& vj : v) vtv += vj.squaredNorm();
  report.variance_factor =
      report.redundancy > 0 ? vtv / static_cast<double>(report.redundancy) : 0.0;
  report.corrections = v;

  const Mat3 r = report.transform.rotation.matrix();
  for (const auto* c : used) {
    double ss = 0.0;
    for (const auto& pt : c->lidar_points) {
      const double d =
          c->model_plane.signed_distance(r * pt + report.transform.translation);
      ss += d * d;
    }
    report.wall_ids.push_back(c->wall_id);
    report.rms_residual.push_back(
        std::sqrt(ss / static_cast<double>(c->lidar_points.size())));
  }
  if (!report.converged) {
    throw NoConvergenceError("no convergence after " + std::to_string(options.max_iter) +
                                 " iterations",
                             report);
  }
  return report;
}

double jacobian_check(const PlaneParams& plane, const Vec3& point, const ParamVector& x0) {
  constexpr double h = 1e-6;
  const ConditionRow row = condition_row(plane, point, x0);
  auto rel = [](double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
  };
  double worst = 0.0;
  for (int i = 0; i < 7; ++i) {
    ParamVector xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    const double fd =
        (condition_row(plane, point, xp).f - condition_row(plane, point, xm).f) / (2 * h);
    worst = std::max(worst, rel(row.a[i], fd));
  }
  for (int i = 0; i < 3; ++i) {
    Vec3 pp = point, pm = point;
    pp[i] += h;
    pm[i] -= h;
    const double fd =
        (condition_row(plane, pp, x0).f - condition_row(plane, pm, x0).f) / (2 * h);
    worst = std::max(worst, rel(row.b[i], fd));
  }
  // c(q) = ||q|| - 1.
  const Eigen::Vector4d q = x0.head<4>();
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector4d qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const double fd = (qp.norm() - qm.norm()) / (2 * h);
    worst = std::max(worst, rel(q[i] / q.norm(), fd));
  }
  return worst;
}

}  // namespace l2mreg
