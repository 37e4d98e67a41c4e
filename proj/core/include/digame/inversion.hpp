#pragma once

#include "digame/probes.hpp"

#include <optional>

namespace digame {

struct InversionSettings {
  double tol = 1e-10;
  int max_iter = 25;
  // Unset means: 10x the control amplitude of the history being predicted.
  std::optional<double> trust_radius;
  double singularity_threshold = 1e-10;
};

struct InversionResult {
  Vec u;
  int iterations = 0;
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
};

// alpha * dp/du, the d x d Jacobian of u -> alpha * p(u, uo, phi).
Mat control_jacobian(const Mat& alpha, const ProbeSet& set, const Vec& u, const Vec& uo, const Vec& phi);

// Solves alpha * p(u, uo, phi_eval) = f_target for u by damped Newton from
// `seed`. Throws SingularJacobian when the Jacobian at the seed (or at an
// iterate) is degenerate, NoConvergence, or LeftLocalBranch.
InversionResult invert_controls(const Mat& alpha, const Vec& f_target, const ProbeSet& set, const Vec& uo,
                                const Vec& phi_eval, const Vec& seed, const InversionSettings& settings);

}  // namespace digame
