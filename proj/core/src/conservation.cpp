#include "digame/conservation.hpp"

#include "digame/error.hpp"

#include <cstdio>
#include <fstream>

namespace digame {

std::vector<Vec> probe_samples(const History& history, const ProbeSet& set) {
  std::vector<Vec> out;
  out.reserve(history.phi.size());
  for (std::size_t k = 0; k < history.phi.size(); ++k) {
    out.push_back(eval_probe_vector(set, history.u_realized[k], history.u_intended[k], history.phi[k]));
  }
  return out;
}

std::vector<Vec> probe_derivatives(const History& history, const ProbeSet& set) {
  if (history.size() < 2) throw Error(ErrorCode::InvalidSpec, "probe_derivatives needs two samples");
  const std::vector<Vec> p = probe_samples(history, set);
  const long n = history.size();
  const int k_dim = set.size();
  std::vector<Vec> out(p.size(), Vec(k_dim));
  std::vector<double> column(p.size());
  for (int j = 0; j < k_dim; ++j) {
    for (long k = 0; k < n; ++k) column[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k)](j);
    for (long k = 0; k < n; ++k) {
      out[static_cast<std::size_t>(k)](j) = central_difference(column, history.grid.h, k);
    }
  }
  for (long k = 0; k < n; ++k) {
    if (!out[static_cast<std::size_t>(k)].allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "probe derivative not finite", k);
    }
  }
  return out;
}

FrameSeries estimate_frames(const History& history, const ProbeSet& set) {
  if (history.size() < 3) throw Error(ErrorCode::InvalidSpec, "estimate_frames needs three samples");
  const std::vector<Vec> p = probe_samples(history, set);
  const std::vector<Vec> pdot = probe_derivatives(history, set);

  FrameSeries series;
  series.frames.reserve(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    ConservedFrame frame;
    frame.tau = history.grid.time(static_cast<long>(k));
    frame.alpha = orthonormal_complement(pdot[k], k == 0 ? nullptr : &series.frames.back().alpha);
    frame.f = frame.alpha * p[k];
    frame.pdot_norm = pdot[k].norm();
    if (k > 0) {
      const double rate = (frame.alpha - series.frames.back().alpha).norm() / history.grid.h;
      series.lipschitz_diagnostic = std::max(series.lipschitz_diagnostic, rate);
    }
    series.frames.push_back(std::move(frame));
  }
  return series;
}

Vec conserved_values(const ConservedFrame& frame, const Vec& p) {
  if (p.size() != frame.alpha.cols()) throw Error(ErrorCode::InvalidSpec, "conserved_values dimension mismatch");
  return frame.alpha * p;
}

void write_frames_csv(const FrameSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  if (series.frames.empty()) return;
  const long d = series[0].alpha.rows();
  const long k_dim = series[0].alpha.cols();
  out << "tau";
  for (long i = 0; i < d; ++i) {
    for (long j = 0; j < k_dim; ++j) out << ",alpha_" << i << j;
  }
  for (long i = 0; i < d; ++i) out << ",f_" << i;
  out << ",pdot_norm\n";
  char buf[40];
  const auto put = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << buf;
  };
  for (const auto& fr : series.frames) {
    put(fr.tau);
    for (long i = 0; i < d; ++i) {
      for (long j = 0; j < k_dim; ++j) {
        out << ',';
        put(fr.alpha(i, j));
      }
    }
    for (long i = 0; i < d; ++i) {
      out << ',';
      put(fr.f(i));
    }
    out << ',';
    put(fr.pdot_norm);
    out << '\n';
  }
}

}  // namespace digame
