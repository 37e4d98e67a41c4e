#include "digame/inversion.hpp"

#include "digame/error.hpp"

namespace digame {

Mat control_jacobian(const Mat& alpha, const ProbeSet& set, const Vec& u, const Vec& uo, const Vec& phi) {
  if (alpha.cols() != set.size()) throw Error(ErrorCode::InvalidSpec, "alpha has the wrong number of columns");
  return alpha * probe_jacobian_u(set, u, uo, phi);
}

InversionResult invert_controls(const Mat& alpha, const Vec& f_target, const ProbeSet& set, const Vec& uo,
                                const Vec& phi_eval, const Vec& seed, const InversionSettings& settings) {
  if (alpha.rows() != set.control_dim() || f_target.size() != alpha.rows()) {
    throw Error(ErrorCode::InvalidSpec, "inversion needs a square d x d system");
  }
  NewtonOptions options;
  options.tol = settings.tol;
  options.max_iter = settings.max_iter;
  options.trust_radius = settings.trust_radius.value_or(10.0);
  options.singularity_threshold = settings.singularity_threshold;

  const auto residual = [&](const Vec& u) -> Vec {
    return alpha * eval_probe_vector(set, u, uo, phi_eval) - f_target;
  };
  const auto jacobian = [&](const Vec& u) -> Mat { return control_jacobian(alpha, set, u, uo, phi_eval); };

  const NewtonResult r = newton_solve(residual, jacobian, seed, options);
  return {r.u, r.iterations, r.min_singular_value, r.max_singular_value};
}

}  // namespace digame
