#include "digame/selection.hpp"

#include "digame/error.hpp"
#include "digame/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace digame {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

Vec canonical_covector(const Vec& c) {
  const double norm = c.norm();
  if (!(norm > 0.0) || !c.allFinite()) throw Error(ErrorCode::InvalidSpec, "covector must be finite and nonzero");
  Vec out = c / norm;
  for (long i = 0; i < out.size(); ++i) {
    if (out(i) != 0.0) {
      if (out(i) < 0.0) out = -out;
      break;
    }
  }
  return out;
}

CandidateLabel CandidateLabel::finite(long id) { return {Kind::Finite, id, Vec()}; }

CandidateLabel CandidateLabel::projective(const Vec& c) { return {Kind::Projective, 0, canonical_covector(c)}; }

std::string CandidateLabel::to_string() const {
  if (kind == Kind::Finite) return "finite:" + std::to_string(id);
  std::string out = "projective:[";
  for (long i = 0; i < c.size(); ++i) {
    if (i) out += ' ';
    out += format_number(c(i));
  }
  return out + "]";
}

bool CandidateLabel::operator==(const CandidateLabel& other) const {
  if (kind != other.kind) return false;
  if (kind == Kind::Finite) return id == other.id;
  return c.size() == other.c.size() && c == other.c;
}

CandidateScore backtest(const GameDefinition& game, const History& history, const CandidateSet& cand, double t0,
                        const SurrogateSpec& spec_template) {
  const auto i_t0 = history.grid.index_of(t0);
  if (!i_t0) throw Error(ErrorCode::InvalidSpec, "backtest time is not a grid point of the history");
  const long delay = delay_steps(spec_template.delay, history.grid.h);
  const long anchor = *i_t0 - delay;
  if (anchor < delay + 2) throw Error(ErrorCode::AnchorTooEarly, "backtest anchor t0 - delay lacks history", anchor);

  SurrogateSpec spec = spec_template;
  spec.probe_set = cand.set;
  // The intended controls over the backtest window are observed.
  spec.plan = ControlPlan::from_schedule([&history](double t) {
    const double x = std::round((t - history.grid.t_start) / history.grid.h);
    const long k = std::clamp(static_cast<long>(x), 0L, history.size() - 1);
    return history.u_intended[static_cast<std::size_t>(k)];
  });

  const Prediction p = predict(game, history, history.grid.time(anchor), spec,
                               static_cast<double>(delay) * history.grid.h);
  if (!p.complete()) return {cand.label, kInf, "truncated:" + p.reason};
  const std::span<const Vec> observed(history.phi.data() + anchor + 1, static_cast<std::size_t>(delay));
  return {cand.label, rms_state_error(p.phi_hat, observed, state_scale(history, *i_t0)), "complete"};
}

double backtest_score(const GameDefinition& game, const History& history, const CandidateSet& cand, double t0,
                      const SurrogateSpec& spec_template) {
  return backtest(game, history, cand, t0, spec_template).score;
}

std::optional<std::size_t> argmin_score(std::span<const double> scores) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) continue;
    if (!best || scores[i] < scores[*best]) best = i;
  }
  return best;
}

std::size_t argmax_score(std::span<const double> scores) {
  std::size_t worst = 0;
  const auto key = [](double s) { return std::isnan(s) ? kInf : s; };
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (key(scores[i]) > key(scores[worst])) worst = i;
  }
  return worst;
}

BacktestReport select_best(const GameDefinition& game, const History& history,
                           std::span<const CandidateSet> candidates, double t0, const SurrogateSpec& spec_template) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidSpec, "select_best needs at least one candidate");
  BacktestReport report;
  std::vector<double> scores;
  for (const auto& cand : candidates) {
    report.entries.push_back(backtest(game, history, cand, t0, spec_template));
    scores.push_back(report.entries.back().score);
  }
  const auto best = argmin_score(scores);
  if (!best) throw Error(ErrorCode::AllCandidatesFailed, "every candidate backtest truncated");
  report.best = *best;
  return report;
}

Mat hyperplane_coefficients(const Vec& c) {
  const Vec n = canonical_covector(c);
  return householder_reflector(n).bottomRows(n.size() - 1);
}

ProbeSet hyperplane_probe_set(std::span<const ProbeExpression> base, const Vec& c, int control_dim, int state_dim) {
  if (static_cast<long>(base.size()) != control_dim + 2 || c.size() != control_dim + 2) {
    throw Error(ErrorCode::InvalidSpec, "hyperplane sets need d + 2 base functions and covector entries");
  }
  const Mat coeffs = hyperplane_coefficients(c);
  std::vector<ProbeExpression> probes;
  for (long j = 0; j < coeffs.rows(); ++j) {
    std::optional<ProbeExpression> sum;
    for (long l = 0; l < coeffs.cols(); ++l) {
      const double a = coeffs(j, l);
      if (a == 0.0) continue;
      auto term = ProbeExpression::multiply(ProbeExpression::constant(a), base[static_cast<std::size_t>(l)]);
      sum = sum ? ProbeExpression::add(*sum, term) : term;
    }
    probes.push_back(sum ? *sum : ProbeExpression::constant(0.0));
  }
  return ProbeSet(std::move(probes), control_dim, state_dim);
}

std::vector<ProbeExpression> default_projective_base(int control_dim) {
  std::vector<ProbeExpression> base;
  for (int i = 0; i < control_dim; ++i) base.push_back(ProbeExpression::u(i));
  base.push_back(ProbeExpression::phi(0));
  base.push_back(ProbeExpression::constant(1.0));
  return base;
}

ProjectiveSearchResult projective_search(const GameDefinition& game, const History& history,
                                         std::span<const ProbeExpression> base, double t0,
                                         const SurrogateSpec& spec_template,
                                         const std::optional<CandidateLabel>& prev, int budget, std::uint64_t seed) {
  if (budget < 1) throw Error(ErrorCode::InvalidSpec, "projective search needs budget >= 1");
  const long dim = static_cast<long>(base.size());
  if (prev && (prev->kind != CandidateLabel::Kind::Projective || prev->c.size() != dim)) {
    throw Error(ErrorCode::InvalidSpec, "previous label must be a projective covector of matching size");
  }

  Rng rng(seed);
  const auto gaussian = [&] {
    Vec g(dim);
    for (long i = 0; i < dim; ++i) g(i) = rng.normal();
    return g;
  };

  std::vector<Vec> covectors;
  int local = 0;
  if (prev) {
    covectors.push_back(prev->c);
    local = (budget - 1) / 2;
  }
  for (int i = 0; i < local; ++i) {
    Vec xi = 0.1 * gaussian();
    xi -= xi.dot(prev->c) * prev->c;
    covectors.push_back(canonical_covector(prev->c + xi));
  }
  while (static_cast<int>(covectors.size()) < budget) {
    const Vec g = gaussian();
    if (g.norm() > 0.0) covectors.push_back(canonical_covector(g));
  }

  const int d = history.control_dim();
  std::vector<CandidateSet> candidates;
  for (const Vec& c : covectors) {
    candidates.push_back({CandidateLabel::projective(c), hyperplane_probe_set(base, c, d, history.state_dim())});
  }
  BacktestReport report = select_best(game, history, candidates, t0, spec_template);
  CandidateLabel best = report.best_label();
  return {std::move(best), std::move(report)};
}

std::vector<CandidateSet> Pool::candidates() const {
  std::vector<CandidateSet> out;
  for (const auto& m : members) out.push_back(m.candidate);
  return out;
}

Pool make_pool(std::vector<ProbeSet> sets) {
  Pool pool;
  for (auto& s : sets) pool.members.push_back({{CandidateLabel::finite(pool.next_id++), std::move(s)}, {}});
  return pool;
}

namespace {

ProbeSet mutate_one_probe(const ProbeSet& parent, const ProbeLibrary& lib, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::size_t pos = rng.index(static_cast<std::size_t>(parent.size()));
    const ProbeExpression& fresh = lib.entries[rng.index(lib.entries.size())];
    const auto& probes = parent.probes();
    if (std::find(probes.begin(), probes.end(), fresh) != probes.end()) continue;
    std::vector<ProbeExpression> next = probes;
    next[pos] = fresh;
    ProbeSet out(std::move(next), parent.control_dim(), parent.state_dim());
    if (out.depends_on_u()) return out;
  }
  throw Error(ErrorCode::ExhaustedDraws, "no valid single-probe mutation in 1000 attempts");
}

}  // namespace

Pool evolve_pool(const Pool& pool, const BacktestReport& report, const ProbeLibrary& lib, std::uint64_t seed) {
  if (pool.size() < 2) throw Error(ErrorCode::InvalidSpec, "pool evolution needs at least two members");
  if (report.entries.size() != pool.members.size()) {
    throw Error(ErrorCode::InvalidSpec, "backtest report does not cover the pool");
  }
  std::vector<double> scores;
  for (std::size_t i = 0; i < pool.members.size(); ++i) {
    if (!(report.entries[i].label == pool.members[i].candidate.label)) {
      throw Error(ErrorCode::InvalidSpec, "backtest report labels do not match the pool order");
    }
    scores.push_back(report.entries[i].score);
  }

  Pool next = pool;
  for (std::size_t i = 0; i < next.members.size(); ++i) next.members[i].score_history.push_back(scores[i]);

  const std::size_t worst = argmax_score(scores);
  // Parent for mutation: best survivor, earliest on ties.
  const auto key = [](double x) { return std::isnan(x) ? kInf : x; };
  std::size_t parent = worst == 0 ? 1 : 0;
  for (std::size_t i = parent + 1; i < scores.size(); ++i) {
    if (i != worst && key(scores[i]) < key(scores[parent])) parent = i;
  }

  Rng rng(seed);
  ProbeSet fresh = rng.uniform() < 0.5 ? random_probe_set(lib, rng.next())
                                        : mutate_one_probe(pool.members[parent].candidate.set, lib, rng);
  next.members[worst] = {{CandidateLabel::finite(next.next_id++), std::move(fresh)}, {}};
  return next;
}

}  // namespace digame
