#pragma once

#include "digame/dynamics.hpp"
#include "digame/predictor.hpp"
#include "digame/probes.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace digame {

// Label mu of a candidate probe set: a finite id or a hyperplane covector
// c (unit norm, first nonzero component positive).
struct CandidateLabel {
  enum class Kind { Finite, Projective };

  Kind kind = Kind::Finite;
  long id = 0;
  Vec c;

  static CandidateLabel finite(long id);
  static CandidateLabel projective(const Vec& c);

  std::string to_string() const;
  bool operator==(const CandidateLabel& other) const;
};

// Unit vector with the first nonzero component made positive.
Vec canonical_covector(const Vec& c);

struct CandidateSet {
  CandidateLabel label;
  ProbeSet set;
};

struct CandidateScore {
  CandidateLabel label;
  double score = 0.0;  // +inf when the backtest prediction truncated
  std::string status;  // "complete" or "truncated:<reason>"
};

struct BacktestReport {
  std::vector<CandidateScore> entries;
  std::size_t best = 0;

  const CandidateLabel& best_label() const { return entries[best].label; }
  double best_score() const { return entries[best].score; }
};

// Predicts the observed window (t0 - delay, t0] from the anchor t0 - delay,
// using the recorded intended controls, and returns the normalised RMS
// state error. Throws AnchorTooEarly.
double backtest_score(const GameDefinition& game, const History& history, const CandidateSet& cand, double t0,
                      const SurrogateSpec& spec_template);
CandidateScore backtest(const GameDefinition& game, const History& history, const CandidateSet& cand, double t0,
                        const SurrogateSpec& spec_template);

// Index of the smallest finite score, earliest on ties; nullopt if none.
std::optional<std::size_t> argmin_score(std::span<const double> scores);
// Index of the largest score (+inf and NaN count as largest), earliest on ties.
std::size_t argmax_score(std::span<const double> scores);

// Throws AllCandidatesFailed when every score is +inf.
BacktestReport select_best(const GameDefinition& game, const History& history,
                           std::span<const CandidateSet> candidates, double t0,
                           const SurrogateSpec& spec_template);

// Rows: orthonormal coefficient vectors spanning {a : c.a = 0}, taken from
// the Householder reflector of the canonical c.
Mat hyperplane_coefficients(const Vec& c);

// Probe j = sum_l a^(j)_l base_l over the d + 2 base functions.
ProbeSet hyperplane_probe_set(std::span<const ProbeExpression> base, const Vec& c, int control_dim,
                              int state_dim);

// (u_0, ..., u_{d-1}, phi_0, 1): d + 2 functions.
std::vector<ProbeExpression> default_projective_base(int control_dim);

struct ProjectiveSearchResult {
  CandidateLabel label;
  BacktestReport report;
};

// Exactly `budget` backtests: prev (if any), Gaussian tangent
// perturbations of prev for half the remainder, uniform covectors for the
// rest.
ProjectiveSearchResult projective_search(const GameDefinition& game, const History& history,
                                         std::span<const ProbeExpression> base, double t0,
                                         const SurrogateSpec& spec_template,
                                         const std::optional<CandidateLabel>& prev, int budget,
                                         std::uint64_t seed);

struct PoolMember {
  CandidateSet candidate;
  std::vector<double> score_history;
};

struct Pool {
  std::vector<PoolMember> members;
  long next_id = 0;

  std::vector<CandidateSet> candidates() const;
  long size() const { return static_cast<long>(members.size()); }
};

Pool make_pool(std::vector<ProbeSet> sets);

// Replaces the worst-scoring member (earliest on ties) with either a fresh
// library draw or a one-probe mutation of the best member, each with
// probability one half. Throws ExhaustedDraws.
Pool evolve_pool(const Pool& pool, const BacktestReport& report, const ProbeLibrary& lib, std::uint64_t seed);

}  // namespace digame
