#pragma once

#include "digame/dynamics.hpp"
#include "digame/probes.hpp"

#include <filesystem>
#include <vector>

namespace digame {

// alpha (d x K, orthonormal rows) annihilates the probe derivative at tau;
// f = alpha * p(tau) are the locally conserved values.
struct ConservedFrame {
  double tau = 0.0;
  Mat alpha;
  Vec f;
  double pdot_norm = 0.0;
};

struct FrameSeries {
  std::vector<ConservedFrame> frames;
  // max_k ||alpha_{k+1} - alpha_k||_F / h
  double lipschitz_diagnostic = 0.0;

  long size() const { return static_cast<long>(frames.size()); }
  const ConservedFrame& operator[](long k) const { return frames[static_cast<std::size_t>(k)]; }
};

// Sampled probe vectors p(u(tau_k), uo(tau_k), phi(tau_k)).
std::vector<Vec> probe_samples(const History& history, const ProbeSet& set);

// Central differences of the sampled probes; one-sided at the ends.
std::vector<Vec> probe_derivatives(const History& history, const ProbeSet& set);

FrameSeries estimate_frames(const History& history, const ProbeSet& set);

Vec conserved_values(const ConservedFrame& frame, const Vec& p);

// CSV: tau, alpha_00..alpha_{d-1,K-1} (row-major), f_0..f_{d-1}, pdot_norm.
void write_frames_csv(const FrameSeries& series, const std::filesystem::path& path);

}  // namespace digame
