#include "digame/numerics.hpp"

#include "digame/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace digame {

TimeGrid::TimeGrid(double t_start_, double h_, long count_)
    : t_start(t_start_), h(h_), count(count_) {
  if (!std::isfinite(t_start) || !std::isfinite(h) || h <= 0.0) {
    throw Error(ErrorCode::InvalidSpec, "time grid needs finite t_start and h > 0");
  }
  if (count < 1) throw Error(ErrorCode::InvalidSpec, "time grid needs count >= 1");
}

std::optional<long> TimeGrid::index_of(double t, double rel_tol) const {
  const double x = (t - t_start) / h;
  const double k = std::round(x);
  if (!std::isfinite(x) || std::abs(x - k) > rel_tol) return std::nullopt;
  if (k < 0 || k > static_cast<double>(count - 1)) return std::nullopt;
  return static_cast<long>(k);
}

bool all_finite(const Vec& v) { return v.allFinite(); }
bool all_finite(const Mat& m) { return m.allFinite(); }

Mat householder_reflector(const Vec& unit) {
  const long k = unit.size();
  Vec w = unit;
  w(0) += unit(0) >= 0.0 ? 1.0 : -1.0;
  Mat h = Mat::Identity(k, k);
  h.noalias() -= (2.0 / w.squaredNorm()) * w * w.transpose();
  return h;
}

namespace {

// Removes the components along `basis` from w (two passes of modified
// Gram-Schmidt) and returns the remaining norm.
double orthogonalise(Vec& w, const std::vector<Vec>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vec& q : basis) w -= q.dot(w) * q;
  }
  return w.norm();
}

constexpr double kDegenerateProjection = 1e-6;

}  // namespace

Mat orthonormal_complement(const Vec& v, const Mat* prev) {
  const long k = v.size();
  if (k < 2) throw Error(ErrorCode::InvalidSpec, "orthonormal_complement needs K >= 2");
  if (prev && (prev->rows() != k - 1 || prev->cols() != k)) {
    throw Error(ErrorCode::InvalidSpec, "previous basis must be (K-1) x K");
  }

  const double norm = v.norm();
  Vec n;
  if (norm == 0.0) {
    if (prev) return *prev;
    n = Vec::Unit(k, k - 1);
  } else {
    n = v / norm;
  }

  const Mat h = householder_reflector(n);
  if (!prev || norm == 0.0) return h.bottomRows(k - 1);

  std::vector<Vec> basis{n};
  basis.reserve(static_cast<std::size_t>(k));
  for (long i = 0; i < k - 1; ++i) {
    Vec w = prev->row(i).transpose();
    const double rest = orthogonalise(w, basis);
    if (rest > kDegenerateProjection) basis.push_back(w / rest);
  }

  // Degenerate projection: complete greedily from the Householder rows.
  while (static_cast<long>(basis.size()) < k) {
    double best_norm = -1.0;
    Vec best;
    for (long i = 1; i < k; ++i) {
      Vec w = h.row(i).transpose();
      const double rest = orthogonalise(w, basis);
      if (rest > best_norm) {
        best_norm = rest;
        best = w;
      }
    }
    basis.push_back(best / best_norm);
  }

  Mat out(k - 1, k);
  for (long i = 0; i < k - 1; ++i) out.row(i) = basis[static_cast<std::size_t>(i + 1)].transpose();
  return out;
}

SingularValues singular_values(const Mat& a) {
  if (a.size() == 0) return {};
  const Eigen::JacobiSVD<Mat> svd(a);
  const Vec& s = svd.singularValues();
  return {s.minCoeff(), s.maxCoeff()};
}

NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian,
                          const Vec& seed, const NewtonOptions& options) {
  if (!(options.tol > 0.0) || options.max_iter < 1 || !(options.trust_radius > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "newton_solve needs tol > 0, max_iter >= 1, trust_radius > 0");
  }

  NewtonResult result;
  result.u = seed;
  Vec r = residual(result.u);
  if (!r.allFinite()) throw Error(ErrorCode::NonFiniteValue, "residual not finite at seed");
  double rnorm = r.lpNorm<Eigen::Infinity>();

  for (int it = 0;; ++it) {
    const Mat jac = jacobian(result.u);
    if (!jac.allFinite()) throw Error(ErrorCode::NonFiniteValue, "jacobian not finite", it);
    const Eigen::JacobiSVD<Mat> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    result.min_singular_value = s.minCoeff();
    result.max_singular_value = s.maxCoeff();
    if (SingularValues{result.min_singular_value, result.max_singular_value}.degenerate(
            options.singularity_threshold)) {
      throw Error(ErrorCode::SingularJacobian, "relative minimum singular value below threshold", it);
    }
    if (rnorm <= options.tol) {
      result.iterations = it;
      return result;
    }
    if (it == options.max_iter) break;

    const Vec step = svd.solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    Vec trial;
    Vec rtrial;
    double tnorm = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 40; ++halving, lambda *= 0.5) {
      trial = result.u + lambda * step;
      rtrial = residual(trial);
      if (rtrial.allFinite()) {
        tnorm = rtrial.lpNorm<Eigen::Infinity>();
        if (tnorm < rnorm || tnorm <= options.tol) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) throw Error(ErrorCode::NoConvergence, "damped step failed to reduce the residual", it + 1);

    result.u = std::move(trial);
    r = std::move(rtrial);
    rnorm = tnorm;
    if ((result.u - seed).norm() > options.trust_radius) {
      throw Error(ErrorCode::LeftLocalBranch, "iterate left the trust region around the seed", it + 1);
    }
  }
  throw Error(ErrorCode::NoConvergence, "iteration limit reached", options.max_iter);
}

Vec rk4_step(const RhsFn& rhs, double t, const Vec& phi, double h) {
  const double half = 0.5 * h;
  const Vec k1 = rhs(t, phi);
  const Vec k2 = rhs(t + half, phi + half * k1);
  const Vec k3 = rhs(t + half, phi + half * k2);
  const Vec k4 = rhs(t + h, phi + h * k3);
  Vec out = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite()) throw Error(ErrorCode::NonFiniteState, "rk4 step produced a non-finite state");
  return out;
}

double central_difference(std::span<const double> samples, double h, long k) {
  const long n = static_cast<long>(samples.size());
  if (n < 2) throw Error(ErrorCode::InvalidSpec, "central_difference needs at least two samples");
  if (k < 0 || k >= n) throw Error(ErrorCode::InvalidSpec, "central_difference index out of range");
  const auto at = [&](long i) { return samples[static_cast<std::size_t>(i)]; };
  if (k == 0) return (at(1) - at(0)) / h;
  if (k == n - 1) return (at(n - 1) - at(n - 2)) / h;
  return (at(k + 1) - at(k - 1)) / (2.0 * h);
}

}  // namespace digame
