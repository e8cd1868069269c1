#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbb/block_bootstrap.hpp"
#include "gbb/error.hpp"
#include "gbb/series.hpp"
#include "gbb/var_model.hpp"

namespace gbb {

struct TracePoint {
  double b;
  double trace;
};

// Bootstrap trace tr(Cov_*(mean)) as a function of the block size.
struct TraceCurve {
  Eigen::Index n = 0;
  std::vector<TracePoint> points;
};

enum class SolveStatus { kSolved, kNoSolution, kNonMonotoneWarning };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kSolved: return "solved";
    case SolveStatus::kNoSolution: return "no-solution";
    case SolveStatus::kNonMonotoneWarning: return "non-monotone-warning";
  }
  return "unknown";
}

struct SolveReport {
  std::optional<double> b_hat;
  double target = 0.0;    // model-implied tr(Cov(mean)) at sample size n
  double achieved = 0.0;  // bootstrap trace at b_hat (closest grid point if unsolved)
  int iterations = 0;     // bisection steps after bracketing
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int sign_changes = 0;
  SolveStatus status = SolveStatus::kNoSolution;
};

struct SolveOptions {
  double lo = 1.01;
  double hi = 0.0;  // <= 0 means n/4
  double tol = 1e-4;
  double grid_step = 0.5;
  int max_iterations = 200;
};

inline TraceCurve trace_curve(BlockMeanCovTable& table, std::span<const double> grid) {
  TraceCurve curve;
  curve.n = table.n();
  double prev = -std::numeric_limits<double>::infinity();
  for (double b : grid) {
    require(b >= 1.0 && b <= static_cast<double>(table.n()), ErrorKind::kInvalidArgument,
            "trace grid point " + std::to_string(b) + " outside [1, n]");
    require(b > prev, ErrorKind::kInvalidArgument, "trace grid must be strictly increasing");
    prev = b;
    curve.points.push_back({b, gbb_mean_cov_exact(table, BlockSize(b)).trace()});
  }
  return curve;
}

inline TraceCurve trace_curve(const Series& s, std::span<const double> grid) {
  BlockMeanCovTable table(s);
  return trace_curve(table, grid);
}

// lo, lo+step, ..., with hi always included.
inline std::vector<double> block_grid(double lo, double hi, double step) {
  require(step > 0.0, ErrorKind::kInvalidArgument, "grid step must be positive");
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double b = lo + step * i;
    if (b >= hi - 1e-12) break;
    grid.push_back(b);
  }
  grid.push_back(hi);
  return grid;
}

// Model-side target: the long-run trace divided by the sample length.
inline double model_mean_cov_trace(const VarModel& m, Eigen::Index n) {
  return mean_cov_trace_limit(m) / static_cast<double>(n);
}

// Solves tr(Cov_*(mean_b)) = target for real b: a coarse grid scan brackets
// the sign changes, then bisection refines the smallest one.
inline SolveReport solve_block_size_for_target(const Series& s, double target,
                                               const SolveOptions& opts = {}) {
  const double n = static_cast<double>(s.n());
  const double hi = opts.hi > 0.0 ? opts.hi : n / 4.0;
  require(opts.lo > 1.0 && opts.lo < hi && hi <= n, ErrorKind::kInvalidArgument,
          "block range must satisfy 1 < lo < hi <= n");
  require(target > 0.0 && std::isfinite(target), ErrorKind::kInvalidArgument,
          "target trace must be positive");
  require(opts.tol > 0.0, ErrorKind::kInvalidArgument, "tolerance must be positive");

  BlockMeanCovTable table(s);
  auto trace_at = [&](double b) { return gbb_mean_cov_exact(table, BlockSize(b)).trace(); };
  const double abs_tol = opts.tol * target;

  SolveReport rep;
  rep.target = target;
  rep.bracket_lo = opts.lo;
  rep.bracket_hi = hi;

  const auto grid = block_grid(opts.lo, hi, opts.grid_step);
  std::vector<double> resid(grid.size());
  std::size_t closest = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    resid[i] = trace_at(grid[i]) - target;
    if (std::abs(resid[i]) < std::abs(resid[closest])) closest = i;
  }

  // Brackets [grid[lo], grid[hi]] holding a root. A run of grid points
  // already within tolerance counts as one root with lo == hi.
  struct Bracket {
    std::size_t lo, hi;
  };
  std::vector<Bracket> brackets;
  bool in_run = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(resid[i]) <= abs_tol) {
      if (!in_run) brackets.push_back({i, i});
      in_run = true;
      continue;
    }
    in_run = false;
    if (i + 1 < grid.size() && std::abs(resid[i + 1]) > abs_tol &&
        (resid[i] < 0.0) != (resid[i + 1] < 0.0))
      brackets.push_back({i, i + 1});
  }

  rep.sign_changes = static_cast<int>(brackets.size());
  if (brackets.empty()) {
    rep.status = SolveStatus::kNoSolution;
    rep.achieved = resid[closest] + target;
    return rep;
  }

  const Bracket first = brackets.front();
  rep.bracket_lo = grid[first.lo];
  rep.bracket_hi = grid[first.hi];
  double b_hat = grid[first.lo];
  double fb_hat = resid[first.lo];
  if (first.hi != first.lo) {
    double a = grid[first.lo];
    double fa = resid[first.lo];
    double b = grid[first.hi];
    for (int it = 0; it < opts.max_iterations; ++it) {
      const double mid = 0.5 * (a + b);
      const double fm = trace_at(mid) - target;
      ++rep.iterations;
      b_hat = mid;
      fb_hat = fm;
      if (std::abs(fm) <= abs_tol) break;
      if ((fm < 0.0) == (fa < 0.0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
      }
    }
  }

  rep.b_hat = b_hat;
  rep.achieved = fb_hat + target;
  if (std::abs(fb_hat) > abs_tol) {
    throw Error(ErrorKind::kNumerical, "bisection did not reach the requested tolerance");
  }
  rep.status = brackets.size() > 1 ? SolveStatus::kNonMonotoneWarning : SolveStatus::kSolved;
  return rep;
}

inline SolveReport solve_block_size(const Series& s, const VarModel& m,
                                    const SolveOptions& opts = {}) {
  require(s.d() == m.d(), ErrorKind::kDimensionMismatch, "series/model dimension mismatch");
  return solve_block_size_for_target(s, model_mean_cov_trace(m, s.n()), opts);
}

// Integer block size in 1..b_max whose bootstrap trace is nearest the
// target; ties go to the smaller block.
inline Eigen::Index argmin_integer_block_size_for_target(const Series& s, double target,
                                                         Eigen::Index b_max) {
  require(b_max >= 1 && b_max <= s.n(), ErrorKind::kInvalidArgument,
          "b_max must be in 1..n");
  BlockMeanCovTable table(s);
  Eigen::Index best = 1;
  double best_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index b = 1; b <= b_max; ++b) {
    const double gap =
        std::abs(gbb_mean_cov_exact(table, BlockSize(static_cast<double>(b))).trace() - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = b;
    }
  }
  return best;
}

inline Eigen::Index argmin_integer_block_size(const Series& s, const VarModel& m,
                                              Eigen::Index b_max) {
  require(s.d() == m.d(), ErrorKind::kDimensionMismatch, "series/model dimension mismatch");
  return argmin_integer_block_size_for_target(s, model_mean_cov_trace(m, s.n()), b_max);
}

}  // namespace gbb
