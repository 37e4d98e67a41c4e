#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>

namespace digame {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Uniform sampling grid: t_k = t_start + k*h, k = 0..count-1.
struct TimeGrid {
  double t_start = 0.0;
  double h = 0.01;
  long count = 0;

  TimeGrid() = default;
  TimeGrid(double t_start, double h, long count);

  double time(long k) const { return t_start + static_cast<double>(k) * h; }
  double t_end() const { return time(count - 1); }

  // Index of the grid point closest to t, if it lies within rel_tol*h of it.
  std::optional<long> index_of(double t, double rel_tol = 1e-6) const;

  bool operator==(const TimeGrid&) const = default;
};

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

// Rows of the result are an orthonormal basis of the complement of v.
//
// With `prev` given and v != 0 the basis is continuity-aligned: each row of
// `prev` is projected onto the complement and re-orthonormalised, with
// Householder rows completing the basis if projection degenerates. With
// v == 0 the previous basis is kept; with neither, the Householder
// complement of the last unit vector is returned.
Mat orthonormal_complement(const Vec& v, const Mat* prev = nullptr);

// Householder reflector H (symmetric, orthogonal) with H*n = -sign(n_0)*e_0
// for a unit vector n. Rows 1.. of H span the complement of n.
Mat householder_reflector(const Vec& unit);

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 25;
  double trust_radius = 10.0;
  double singularity_threshold = 1e-10;
};

struct NewtonResult {
  Vec u;
  int iterations = 0;
  // Singular values of the last Jacobian factored (at the seed when no
  // step was needed).
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
};

using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

struct SingularValues {
  double min = 0.0;
  double max = 0.0;
  bool degenerate(double threshold) const { return max <= 0.0 || min < threshold * max; }
};

SingularValues singular_values(const Mat& a);

// Damped Newton iteration. Throws Error{SingularJacobian, NoConvergence,
// LeftLocalBranch}.
NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian,
                          const Vec& seed, const NewtonOptions& options);

using RhsFn = std::function<Vec(double, const Vec&)>;

// Classical RK4. Throws Error{NonFiniteState} on non-finite output.
Vec rk4_step(const RhsFn& rhs, double t, const Vec& phi, double h);

// Central difference at interior k, first-order one-sided at both ends.
double central_difference(std::span<const double> samples, double h, long k);

}  // namespace digame
