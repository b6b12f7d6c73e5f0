#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "icpkit/errors.hpp"

namespace icpkit {

/// Discrete belief over a 1D or 2D grid of cells. width = 0 means 1D;
/// otherwise cells are row-major with `width` columns. Public operations
/// keep the mass normalized to 1.
struct GridBelief {
  std::vector<double> cells;
  double cell_size = 1.0;  // meters
  std::size_t width = 0;

  std::size_t cols() const { return width == 0 ? cells.size() : width; }
  std::size_t rows() const {
    return cols() == 0 ? 0 : cells.size() / cols();
  }
};

inline GridBelief uniform_belief(std::size_t n, double cell_size = 1.0,
                                 std::size_t width = 0) {
  GridBelief b;
  b.cells.assign(n, 1.0 / static_cast<double>(n));
  b.cell_size = cell_size;
  b.width = width;
  return b;
}

inline GridBelief point_belief(std::size_t n, std::size_t at,
                               double cell_size = 1.0, std::size_t width = 0) {
  GridBelief b;
  b.cells.assign(n, 0.0);
  b.cells.at(at) = 1.0;
  b.cell_size = cell_size;
  b.width = width;
  return b;
}

/// One tap of a finite-support shift kernel: probability p of moving by
/// (dx, dy) cells. dy must be 0 on 1D grids.
struct KernelTap {
  int dx = 0;
  int dy = 0;
  double p = 0.0;
};

struct ShiftKernel {
  std::vector<KernelTap> taps;
};

/// Shift kernels indexed by command name.
struct MotionModel {
  std::map<std::string, ShiftKernel> kernels;
};

/// Per-cell likelihood vectors indexed by observation name.
struct MeasurementModel {
  std::map<std::string, std::vector<double>> likelihoods;
};

namespace detail {

inline void check_belief(const GridBelief& b, const char* op) {
  if (b.cells.empty())
    throw Error("InvalidBelief", std::string(op) + " on empty grid");
  double sum = 0.0;
  for (double v : b.cells) {
    if (v < 0.0)
      throw Error("InvalidBelief",
                  std::string(op) + " on belief with negative mass");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw Error("InvalidBelief",
                std::string(op) + " on unnormalized belief");
}

inline std::size_t clamp_index(long long v, std::size_t n) {
  if (v < 0) return 0;
  if (v >= static_cast<long long>(n)) return n - 1;
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Motion update: new mass at x is the kernel-weighted sum of old mass
/// over predecessors. Mass shifted past the grid edge stays in the edge
/// cell (absorbing boundary), so the total is preserved.
inline GridBelief predict(const GridBelief& belief, const MotionModel& motion,
                          const std::string& command) {
  detail::check_belief(belief, "predict");
  const auto it = motion.kernels.find(command);
  if (it == motion.kernels.end())
    throw Error("UnknownCommand", command);
  const ShiftKernel& kernel = it->second;

  double psum = 0.0;
  for (const KernelTap& tap : kernel.taps) {
    if (tap.p < 0.0)
      throw Error("InvalidKernel", "negative tap probability");
    psum += tap.p;
  }
  if (std::abs(psum - 1.0) > 1e-9)
    throw Error("InvalidKernel",
                "kernel for '" + command + "' does not sum to 1");

  const std::size_t cols = belief.cols();
  const std::size_t rows = belief.rows();
  GridBelief out = belief;
  out.cells.assign(belief.cells.size(), 0.0);
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      const double mass = belief.cells[y * cols + x];
      if (mass == 0.0) continue;
      for (const KernelTap& tap : kernel.taps) {
        const std::size_t cx =
            detail::clamp_index(static_cast<long long>(x) + tap.dx, cols);
        const std::size_t cy =
            detail::clamp_index(static_cast<long long>(y) + tap.dy, rows);
        out.cells[cy * cols + cx] += tap.p * mass;
      }
    }
  }

  double total = 0.0;
  for (double v : out.cells) total += v;
  for (double& v : out.cells) v /= total;
  return out;
}

/// Measurement update: multiply by the likelihood of the observation and
/// renormalize (the normalization factor is the reciprocal of the total
/// unnormalized mass).
inline GridBelief correct(const GridBelief& belief,
                          const MeasurementModel& meas,
                          const std::string& observation) {
  detail::check_belief(belief, "correct");
  const auto it = meas.likelihoods.find(observation);
  if (it == meas.likelihoods.end())
    throw Error("UnknownObservation", observation);
  const std::vector<double>& lik = it->second;
  if (lik.size() != belief.cells.size())
    throw Error("InvalidModel",
                "likelihood length does not match the grid");

  GridBelief out = belief;
  double total = 0.0;
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    if (lik[i] < 0.0)
      throw Error("InvalidModel", "negative likelihood entry");
    out.cells[i] = lik[i] * belief.cells[i];
    total += out.cells[i];
  }
  if (total == 0.0)
    throw ZeroLikelihoodError(
        "observation '" + observation + "' impossible under current belief");
  for (double& v : out.cells) v /= total;
  return out;
}

/// Alternating predict/correct over a command/observation sequence.
/// Element k of the returned trace is the posterior after step k.
inline std::vector<GridBelief> filter_run(
    const GridBelief& initial,
    const std::vector<std::pair<std::string, std::string>>& steps,
    const MotionModel& motion, const MeasurementModel& meas) {
  std::vector<GridBelief> trace;
  trace.reserve(steps.size());
  GridBelief b = initial;
  for (const auto& [command, observation] : steps) {
    b = correct(predict(b, motion, command), meas, observation);
    trace.push_back(b);
  }
  return trace;
}

}  // namespace icpkit
