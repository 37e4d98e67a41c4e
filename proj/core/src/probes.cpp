#include "digame/probes.hpp"

#include "digame/error.hpp"
#include "digame/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace digame {

struct ProbeExpression::Node {
  Kind kind;
  double value = 0.0;  // Constant
  int index = 0;       // variables; exponent for Power
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
  bool has_u = false;
};

namespace {

using NodePtr = std::shared_ptr<const ProbeExpression::Node>;
using Kind = ProbeExpression::Kind;

NodePtr make_node(Kind kind, double value, int index, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<ProbeExpression::Node>();
  n->kind = kind;
  n->value = value;
  n->index = index;
  n->has_u = kind == Kind::U || (a && a->has_u) || (b && b->has_u);
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_prefix(const ProbeExpression::Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::Constant: out += format_number(n.value); return;
    case Kind::U: out += "u" + std::to_string(n.index); return;
    case Kind::UIntended: out += "uo" + std::to_string(n.index); return;
    case Kind::Phi: out += "phi" + std::to_string(n.index); return;
    case Kind::Tanh:
      out += "(tanh ";
      write_prefix(*n.a, out);
      out += ')';
      return;
    case Kind::Power:
      out += "(^ ";
      write_prefix(*n.a, out);
      out += ' ' + std::to_string(n.index) + ')';
      return;
    case Kind::Add:
    case Kind::Subtract:
    case Kind::Multiply:
      out += n.kind == Kind::Add ? "(+ " : n.kind == Kind::Subtract ? "(- " : "(* ";
      write_prefix(*n.a, out);
      out += ' ';
      write_prefix(*n.b, out);
      out += ')';
      return;
  }
}

double eval_node(const ProbeExpression::Node& n, const Vec& u, const Vec& uo, const Vec& phi) {
  switch (n.kind) {
    case Kind::Constant: return n.value;
    case Kind::U: return u(n.index);
    case Kind::UIntended: return uo(n.index);
    case Kind::Phi: return phi(n.index);
    case Kind::Add: return eval_node(*n.a, u, uo, phi) + eval_node(*n.b, u, uo, phi);
    case Kind::Subtract: return eval_node(*n.a, u, uo, phi) - eval_node(*n.b, u, uo, phi);
    case Kind::Multiply: return eval_node(*n.a, u, uo, phi) * eval_node(*n.b, u, uo, phi);
    case Kind::Power: return std::pow(eval_node(*n.a, u, uo, phi), n.index);
    case Kind::Tanh: return std::tanh(eval_node(*n.a, u, uo, phi));
  }
  return 0.0;
}

// Forward-mode differentiation with respect to u; grad is overwritten.
double grad_node(const ProbeExpression::Node& n, const Vec& u, const Vec& uo, const Vec& phi, Vec& grad) {
  if (!n.has_u) {
    grad.setZero();
    return eval_node(n, u, uo, phi);
  }
  switch (n.kind) {
    case Kind::U:
      grad.setZero();
      grad(n.index) = 1.0;
      return u(n.index);
    case Kind::Add:
    case Kind::Subtract: {
      Vec gb(grad.size());
      const double va = grad_node(*n.a, u, uo, phi, grad);
      const double vb = grad_node(*n.b, u, uo, phi, gb);
      if (n.kind == Kind::Add) {
        grad += gb;
        return va + vb;
      }
      grad -= gb;
      return va - vb;
    }
    case Kind::Multiply: {
      Vec gb(grad.size());
      const double va = grad_node(*n.a, u, uo, phi, grad);
      const double vb = grad_node(*n.b, u, uo, phi, gb);
      grad = vb * grad + va * gb;
      return va * vb;
    }
    case Kind::Power: {
      const double va = grad_node(*n.a, u, uo, phi, grad);
      if (n.index == 0) {
        grad.setZero();
        return 1.0;
      }
      grad *= n.index * std::pow(va, n.index - 1);
      return std::pow(va, n.index);
    }
    case Kind::Tanh: {
      const double va = grad_node(*n.a, u, uo, phi, grad);
      const double t = std::tanh(va);
      grad *= 1.0 - t * t;
      return t;
    }
    default: break;
  }
  grad.setZero();
  return eval_node(n, u, uo, phi);
}

int extent(const ProbeExpression::Node& n, Kind family) {
  int out = n.kind == family ? n.index + 1 : 0;
  if (n.a) out = std::max(out, extent(*n.a, family));
  if (n.b) out = std::max(out, extent(*n.b, family));
  return out;
}

class PrefixParser {
 public:
  explicit PrefixParser(std::string_view text) : text_(text) {}

  NodePtr parse_all() {
    NodePtr n = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, what + " at offset " + std::to_string(pos_) + " in '" +
                                           std::string(text_) + "'",
                static_cast<long>(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view atom() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) fail("expected a token");
    return text_.substr(start, pos_ - start);
  }

  void expect_close() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
    ++pos_;
  }

  static bool parse_int(std::string_view s, int& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
  }

  NodePtr variable_or_number(std::string_view tok) {
    int idx = 0;
    if (tok.starts_with("uo") && parse_int(tok.substr(2), idx) && idx >= 0) {
      return make_node(Kind::UIntended, 0.0, idx);
    }
    if (tok.starts_with("u") && parse_int(tok.substr(1), idx) && idx >= 0) {
      return make_node(Kind::U, 0.0, idx);
    }
    if (tok.starts_with("phi") && parse_int(tok.substr(3), idx) && idx >= 0) {
      return make_node(Kind::Phi, 0.0, idx);
    }
    double value = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(value)) {
      fail("unknown token '" + std::string(tok) + "'");
    }
    return make_node(Kind::Constant, value, 0);
  }

  NodePtr parse_expr() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (text_[pos_] == ')') fail("unexpected ')'");
    if (text_[pos_] != '(') return variable_or_number(atom());
    ++pos_;
    const std::string_view op = atom();
    if (op == "tanh") {
      NodePtr a = parse_expr();
      expect_close();
      return make_node(Kind::Tanh, 0.0, 0, std::move(a));
    }
    if (op == "^") {
      NodePtr a = parse_expr();
      int exponent = 0;
      if (!parse_int(atom(), exponent)) fail("power needs an integer exponent");
      expect_close();
      return make_node(Kind::Power, 0.0, exponent, std::move(a));
    }
    Kind kind;
    if (op == "+") {
      kind = Kind::Add;
    } else if (op == "-") {
      kind = Kind::Subtract;
    } else if (op == "*") {
      kind = Kind::Multiply;
    } else {
      fail("unknown operator '" + std::string(op) + "'");
    }
    NodePtr a = parse_expr();
    NodePtr b = parse_expr();
    expect_close();
    return make_node(kind, 0.0, 0, std::move(a), std::move(b));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ProbeExpression ProbeExpression::constant(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, "probe constant must be finite");
  return ProbeExpression(make_node(Kind::Constant, value, 0));
}
ProbeExpression ProbeExpression::u(int index) { return ProbeExpression(make_node(Kind::U, 0.0, index)); }
ProbeExpression ProbeExpression::uo(int index) {
  return ProbeExpression(make_node(Kind::UIntended, 0.0, index));
}
ProbeExpression ProbeExpression::phi(int index) { return ProbeExpression(make_node(Kind::Phi, 0.0, index)); }
ProbeExpression ProbeExpression::add(ProbeExpression a, ProbeExpression b) {
  return ProbeExpression(make_node(Kind::Add, 0.0, 0, std::move(a.node_), std::move(b.node_)));
}
ProbeExpression ProbeExpression::subtract(ProbeExpression a, ProbeExpression b) {
  return ProbeExpression(make_node(Kind::Subtract, 0.0, 0, std::move(a.node_), std::move(b.node_)));
}
ProbeExpression ProbeExpression::multiply(ProbeExpression a, ProbeExpression b) {
  return ProbeExpression(make_node(Kind::Multiply, 0.0, 0, std::move(a.node_), std::move(b.node_)));
}
ProbeExpression ProbeExpression::power(ProbeExpression a, int exponent) {
  return ProbeExpression(make_node(Kind::Power, 0.0, exponent, std::move(a.node_)));
}
ProbeExpression ProbeExpression::tanh(ProbeExpression a) {
  return ProbeExpression(make_node(Kind::Tanh, 0.0, 0, std::move(a.node_)));
}

ProbeExpression ProbeExpression::parse(std::string_view text) {
  return ProbeExpression(PrefixParser(text).parse_all());
}

std::string ProbeExpression::to_prefix() const {
  std::string out;
  write_prefix(*node_, out);
  return out;
}

ProbeExpression::Kind ProbeExpression::kind() const { return node_->kind; }
bool ProbeExpression::depends_on_u() const { return node_->has_u; }
int ProbeExpression::u_extent() const {
  return std::max(extent(*node_, Kind::U), extent(*node_, Kind::UIntended));
}
int ProbeExpression::phi_extent() const { return extent(*node_, Kind::Phi); }

double ProbeExpression::eval(const Vec& u, const Vec& uo, const Vec& phi) const {
  return eval_node(*node_, u, uo, phi);
}

double ProbeExpression::eval_with_gradient(const Vec& u, const Vec& uo, const Vec& phi, Vec& grad) const {
  grad.resize(u.size());
  return grad_node(*node_, u, uo, phi, grad);
}

ProbeSet::ProbeSet(std::vector<ProbeExpression> probes, int control_dim, int state_dim)
    : probes_(std::move(probes)), d_(control_dim), m_(state_dim) {
  if (d_ < 1 || m_ < 1) throw Error(ErrorCode::InvalidProbeSet, "probe set needs d >= 1 and m >= 1");
  if (static_cast<int>(probes_.size()) != d_ + 1) {
    throw Error(ErrorCode::InvalidProbeSet, "probe set needs exactly d + 1 = " + std::to_string(d_ + 1) +
                                                " probes, got " + std::to_string(probes_.size()));
  }
  for (std::size_t j = 0; j < probes_.size(); ++j) {
    if (probes_[j].u_extent() > d_ || probes_[j].phi_extent() > m_) {
      throw Error(ErrorCode::InvalidProbeSet, "probe '" + probes_[j].to_prefix() + "' indexes out of bounds",
                  static_cast<long>(j));
    }
  }
}

bool ProbeSet::depends_on_u() const {
  return std::any_of(probes_.begin(), probes_.end(), [](const auto& p) { return p.depends_on_u(); });
}

ProbeSet canonical_probe_set(int control_dim, int state_dim) {
  std::vector<ProbeExpression> probes;
  for (int i = 0; i < control_dim; ++i) probes.push_back(ProbeExpression::u(i));
  probes.push_back(ProbeExpression::phi(0));
  return ProbeSet(std::move(probes), control_dim, state_dim);
}

namespace {

void check_dims(const ProbeSet& set, const Vec& u, const Vec& uo, const Vec& phi) {
  if (u.size() != set.control_dim() || uo.size() != set.control_dim() || phi.size() != set.state_dim()) {
    throw Error(ErrorCode::InvalidSpec, "probe evaluation dimension mismatch");
  }
}

}  // namespace

Vec eval_probe_vector(const ProbeSet& set, const Vec& u, const Vec& uo, const Vec& phi) {
  check_dims(set, u, uo, phi);
  Vec out(set.size());
  for (int j = 0; j < set.size(); ++j) out(j) = set[j].eval(u, uo, phi);
  if (!out.allFinite()) throw Error(ErrorCode::NonFiniteValue, "probe value not finite");
  return out;
}

Mat probe_jacobian_u(const ProbeSet& set, const Vec& u, const Vec& uo, const Vec& phi) {
  check_dims(set, u, uo, phi);
  Mat out(set.size(), set.control_dim());
  Vec grad(set.control_dim());
  for (int j = 0; j < set.size(); ++j) {
    set[j].eval_with_gradient(u, uo, phi, grad);
    out.row(j) = grad.transpose();
  }
  if (!out.allFinite()) throw Error(ErrorCode::NonFiniteValue, "probe derivative not finite");
  return out;
}

nlohmann::json probe_set_to_json(const ProbeSet& set) {
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& p : set.probes()) probes.push_back(p.to_prefix());
  return {{"d", set.control_dim()}, {"m", set.state_dim()}, {"probes", probes}};
}

ProbeSet probe_set_from_json(const nlohmann::json& j) {
  try {
    std::vector<ProbeExpression> probes;
    for (const auto& p : j.at("probes")) probes.push_back(ProbeExpression::parse(p.get<std::string>()));
    return ProbeSet(std::move(probes), j.at("d").get<int>(), j.at("m").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("probe set: ") + e.what());
  }
}

ProbeSet load_probe_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return probe_set_from_json(j);
}

void save_probe_set(const ProbeSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << probe_set_to_json(set).dump(2) << '\n';
}

ProbeLibrary generate_library(int control_dim, int state_dim) {
  if (control_dim < 1 || state_dim < 1) throw Error(ErrorCode::InvalidSpec, "library needs d >= 1 and m >= 1");
  std::vector<ProbeExpression> vars;
  for (int i = 0; i < control_dim; ++i) vars.push_back(ProbeExpression::u(i));
  for (int i = 0; i < control_dim; ++i) vars.push_back(ProbeExpression::uo(i));
  for (int i = 0; i < state_dim; ++i) vars.push_back(ProbeExpression::phi(i));

  ProbeLibrary lib{control_dim, state_dim, vars};
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = i; j < vars.size(); ++j) {
      lib.entries.push_back(i == j ? ProbeExpression::power(vars[i], 2)
                                   : ProbeExpression::multiply(vars[i], vars[j]));
    }
  }
  for (const auto& v : vars) lib.entries.push_back(ProbeExpression::tanh(v));
  return lib;
}

ProbeSet random_probe_set(const ProbeLibrary& lib, std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(lib.control_dim + 1);
  if (lib.entries.size() < k) throw Error(ErrorCode::InvalidSpec, "library smaller than d + 1");
  Rng rng(seed);
  std::vector<std::size_t> order(lib.entries.size());
  for (int rejected = 0; rejected < 1000; ++rejected) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k positions are the draw.
    for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
    std::vector<ProbeExpression> picked;
    for (std::size_t i = 0; i < k; ++i) picked.push_back(lib.entries[order[i]]);
    if (std::any_of(picked.begin(), picked.end(), [](const auto& p) { return p.depends_on_u(); })) {
      return ProbeSet(std::move(picked), lib.control_dim, lib.state_dim);
    }
  }
  throw Error(ErrorCode::ExhaustedDraws, "no u-dependent probe drawn in 1000 attempts");
}

}  // namespace digame
