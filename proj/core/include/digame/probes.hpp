#pragma once

#include "digame/numerics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace digame {

// Immutable expression tree over u[0..d), uo[0..d), phi[0..m) and constants.
//
// Text form is prefix notation: `u0`, `uo1`, `phi0`, numbers, `(+ a b)`,
// `(- a b)`, `(* a b)`, `(^ a n)` with integer n, `(tanh a)`.
class ProbeExpression {
 public:
  enum class Kind { Constant, U, UIntended, Phi, Add, Subtract, Multiply, Power, Tanh };

  static ProbeExpression constant(double value);
  static ProbeExpression u(int index);
  static ProbeExpression uo(int index);
  static ProbeExpression phi(int index);
  static ProbeExpression add(ProbeExpression a, ProbeExpression b);
  static ProbeExpression subtract(ProbeExpression a, ProbeExpression b);
  static ProbeExpression multiply(ProbeExpression a, ProbeExpression b);
  static ProbeExpression power(ProbeExpression a, int exponent);
  static ProbeExpression tanh(ProbeExpression a);

  // Throws ParseError.
  static ProbeExpression parse(std::string_view text);
  std::string to_prefix() const;

  Kind kind() const;
  bool depends_on_u() const;
  // Largest variable index + 1 per variable family (0 if absent).
  int u_extent() const;
  int phi_extent() const;

  double eval(const Vec& u, const Vec& uo, const Vec& phi) const;
  // Value, with d(value)/du written into `grad` (size d).
  double eval_with_gradient(const Vec& u, const Vec& uo, const Vec& phi, Vec& grad) const;

  bool operator==(const ProbeExpression& other) const { return to_prefix() == other.to_prefix(); }

  struct Node;

 private:
  explicit ProbeExpression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// K = d + 1 probe functions. Construction enforces the size and the
// variable bounds (throws InvalidProbeSet).
class ProbeSet {
 public:
  ProbeSet(std::vector<ProbeExpression> probes, int control_dim, int state_dim);

  int control_dim() const { return d_; }
  int state_dim() const { return m_; }
  int size() const { return static_cast<int>(probes_.size()); }
  const std::vector<ProbeExpression>& probes() const { return probes_; }
  const ProbeExpression& operator[](int j) const { return probes_[static_cast<std::size_t>(j)]; }
  bool depends_on_u() const;

  bool operator==(const ProbeSet&) const = default;

 private:
  std::vector<ProbeExpression> probes_;
  int d_;
  int m_;
};

// The coordinate set (u_0, ..., u_{d-1}, phi_0).
ProbeSet canonical_probe_set(int control_dim, int state_dim);

// Throws NonFiniteValue.
Vec eval_probe_vector(const ProbeSet& set, const Vec& u, const Vec& uo, const Vec& phi);
Mat probe_jacobian_u(const ProbeSet& set, const Vec& u, const Vec& uo, const Vec& phi);

nlohmann::json probe_set_to_json(const ProbeSet& set);
ProbeSet probe_set_from_json(const nlohmann::json& j);
ProbeSet load_probe_set(const std::filesystem::path& path);
void save_probe_set(const ProbeSet& set, const std::filesystem::path& path);

struct ProbeLibrary {
  int control_dim = 0;
  int state_dim = 0;
  std::vector<ProbeExpression> entries;
};

// Degree-1 monomials, then degree-2 monomials, then tanh of each variable,
// over the variable order u, uo, phi.
ProbeLibrary generate_library(int control_dim, int state_dim);

// d + 1 distinct library entries, at least one depending on u. Throws
// ExhaustedDraws after 1000 rejected draws.
ProbeSet random_probe_set(const ProbeLibrary& lib, std::uint64_t seed);

}  // namespace digame
