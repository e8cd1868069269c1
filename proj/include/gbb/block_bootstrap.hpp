#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gbb/error.hpp"
#include "gbb/parallel.hpp"
#include "gbb/rng.hpp"
#include "gbb/series.hpp"

namespace gbb {

// Real-valued block length. Blocks have length floor(b) with probability
// 1 - (b - floor(b)) and ceil(b) otherwise, so the expected length is b.
class BlockSize {
 public:
  explicit BlockSize(double b) : b_(b) {
    require(std::isfinite(b) && b >= 1.0, ErrorKind::kInvalidArgument,
            "block size must be a finite real >= 1");
    floor_ = static_cast<Eigen::Index>(std::floor(b));
    ceil_ = static_cast<Eigen::Index>(std::ceil(b));
    p_up_ = b - static_cast<double>(floor_);
  }

  double value() const { return b_; }
  Eigen::Index floor_length() const { return floor_; }
  Eigen::Index ceil_length() const { return ceil_; }
  double p_up() const { return p_up_; }
  bool is_integer() const { return floor_ == ceil_; }

  void require_valid_for(Eigen::Index n) const {
    require(b_ <= static_cast<double>(n), ErrorKind::kInvalidArgument,
            "block size " + std::to_string(b_) + " exceeds sample length " + std::to_string(n));
  }

 private:
  double b_;
  Eigen::Index floor_ = 1;
  Eigen::Index ceil_ = 1;
  double p_up_ = 0.0;
};

struct Block {
  std::int64_t start;   // one-based index on the wrapped series
  Eigen::Index length;
};

struct BootstrapSample {
  Series values;
  std::vector<Block> block_log;
};

// Copies the circular blocks into a new series of total length sum(lengths).
inline Series assemble_blocks(const Series& s, const std::vector<Block>& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.length;
  Matrix out(total, s.d());
  Eigen::Index row = 0;
  for (const auto& b : blocks)
    for (Eigen::Index j = 0; j < b.length; ++j)
      out.row(row++) = s.row(circular_row(s.n(), b.start + j));
  return Series(std::move(out));
}

// Classical circular block bootstrap: m blocks of fixed length b with uniform
// starts on 1..n, giving n' = m*b pseudo-observations.
inline BootstrapSample cbb_sample(const Series& s, Eigen::Index b, Eigen::Index m,
                                  std::uint64_t seed) {
  require(b >= 1 && b <= s.n(), ErrorKind::kInvalidArgument, "block length must be in 1..n");
  require(m >= 1, ErrorKind::kInvalidArgument, "number of blocks must be >= 1");
  Engine engine = make_engine(seed);
  std::uniform_int_distribution<std::int64_t> start(1, s.n());
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < m; ++k) blocks.push_back({start(engine), b});
  return {assemble_blocks(s, blocks), std::move(blocks)};
}

// Sequential block draws until the cumulative length reaches n; the last
// block is truncated so that the lengths sum to exactly n.
template <typename Rng>
std::vector<Block> draw_blocks(Eigen::Index n, const BlockSize& bs, Rng& engine) {
  std::uniform_int_distribution<std::int64_t> start(1, n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Block> blocks;
  Eigen::Index total = 0;
  while (total < n) {
    const std::int64_t k = start(engine);
    Eigen::Index len = bs.floor_length();
    if (!bs.is_integer() && unit(engine) < bs.p_up()) len = bs.ceil_length();
    if (total + len > n) len = n - total;
    blocks.push_back({k, len});
    total += len;
  }
  return blocks;
}

inline BootstrapSample gbb_sample(const Series& s, const BlockSize& bs, std::uint64_t seed) {
  bs.require_valid_for(s.n());
  Engine engine = make_engine(seed);
  auto blocks = draw_blocks(s.n(), bs, engine);
  return {assemble_blocks(s, blocks), std::move(blocks)};
}

// Law of N, the number of full floor(b)-blocks in a generalized bootstrap
// sample. g and r are the matching numbers of full ceil(b)-blocks and the
// length of the truncated final block (0 when the blocks fit exactly).
struct NLawPoint {
  Eigen::Index k;
  double prob;
  Eigen::Index g;
  Eigen::Index r;
};

struct NLaw {
  Eigen::Index n = 0;
  Eigen::Index floor_b = 1;
  Eigen::Index ceil_b = 1;
  std::vector<NLawPoint> points;

  template <typename F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (const auto& pt : points) acc += pt.prob * f(pt);
    return acc;
  }
  double mean_n() const { return expect([](const NLawPoint& p) { return double(p.k); }); }
  double mean_g() const { return expect([](const NLawPoint& p) { return double(p.g); }); }
  double mean_r() const { return expect([](const NLawPoint& p) { return double(p.r); }); }
  double var_n() const {
    const double m = mean_n();
    return expect([m](const NLawPoint& p) { return (p.k - m) * (p.k - m); });
  }
  double var_g() const {
    const double m = mean_g();
    return expect([m](const NLawPoint& p) { return (p.g - m) * (p.g - m); });
  }
  double var_r() const {
    const double m = mean_r();
    return expect([m](const NLawPoint& p) { return (p.r - m) * (p.r - m); });
  }
  // P(r(N) = i) for i = 0..floor(b).
  std::vector<double> r_law() const {
    std::vector<double> law(static_cast<std::size_t>(floor_b) + 1, 0.0);
    for (const auto& pt : points) law[static_cast<std::size_t>(pt.r)] += pt.prob;
    return law;
  }
};

// Dynamic programme over (cumulative length, floor-blocks so far). Only
// ceil(b)+1 cumulative lengths are live at any time, kept in a ring buffer.
inline NLaw n_law(Eigen::Index n, const BlockSize& bs) {
  require(n >= 1, ErrorKind::kInvalidArgument, "n must be >= 1");
  bs.require_valid_for(n);
  const Eigen::Index f = bs.floor_length();
  const Eigen::Index c = bs.ceil_length();
  const double p_up = bs.is_integer() ? 0.0 : bs.p_up();
  const double p_down = 1.0 - p_up;
  const auto max_k = static_cast<std::size_t>(n / f + 1);

  const auto ring = static_cast<std::size_t>(c + 1);
  std::vector<std::vector<double>> mass(ring, std::vector<double>(max_k + 1, 0.0));
  std::vector<double> stopped(max_k + 1, 0.0);
  mass[0][0] = 1.0;

  auto step = [&](Eigen::Index s, std::size_t k, Eigen::Index len, std::size_t k_next,
                  double q) {
    const Eigen::Index s2 = s + len;
    if (s2 < n) {
      mass[static_cast<std::size_t>(s2) % ring][k_next] += q;
    } else if (s2 == n) {
      stopped[k_next] += q;
    } else {
      stopped[k] += q;  // truncated block, not counted
    }
  };

  for (Eigen::Index s = 0; s < n; ++s) {
    auto& row = mass[static_cast<std::size_t>(s) % ring];
    for (std::size_t k = 0; k <= max_k; ++k) {
      const double q = row[k];
      if (q == 0.0) continue;
      row[k] = 0.0;
      if (p_down > 0.0) step(s, k, f, k + 1, q * p_down);
      if (p_up > 0.0) step(s, k, c, k, q * p_up);
    }
  }

  NLaw law;
  law.n = n;
  law.floor_b = f;
  law.ceil_b = c;
  for (std::size_t k = 0; k <= max_k; ++k) {
    if (stopped[k] == 0.0) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    const Eigen::Index rest = n - kk * f;
    const Eigen::Index g = bs.is_integer() ? 0 : rest / c;
    const Eigen::Index r = rest - g * c;
    law.points.push_back({kk, stopped[k], g, r});
  }
  return law;
}

// Exact conditional covariances of circular block means for one series,
// with a per-length cache so that sweeps over b reuse work.
class BlockMeanCovTable {
 public:
  explicit BlockMeanCovTable(const Series& s)
      : n_(s.n()), d_(s.d()), centered_mean_(Vector::Zero(s.d())) {
    const Matrix x = centered(s).values();
    centered_mean_ = x.colwise().mean().transpose();
    prefix_ = Matrix::Zero(2 * n_ + 1, d_);
    for (Eigen::Index t = 0; t < 2 * n_; ++t) prefix_.row(t + 1) = prefix_.row(t) + x.row(t % n_);
    cache_.resize(static_cast<std::size_t>(n_) + 1);
  }

  Eigen::Index n() const { return n_; }
  Eigen::Index d() const { return d_; }

  // Mean of the (centered) wrapped series; zero up to rounding.
  const Vector& centered_mean() const { return centered_mean_; }

  // (1/n) sum_k m_k m_k^T - xbar xbar^T over the n circular blocks of
  // length l; l = 0 yields the zero matrix.
  const CovMatrix& get(Eigen::Index l) {
    require(l >= 0 && l <= n_, ErrorKind::kInvalidArgument, "block length must be in 0..n");
    auto& slot = cache_[static_cast<std::size_t>(l)];
    if (!slot) {
      CovMatrix acc = CovMatrix::Zero(d_, d_);
      if (l > 0) {
        RowVector m(d_);
        for (Eigen::Index k = 0; k < n_; ++k) {
          m = (prefix_.row(k + l) - prefix_.row(k)) / static_cast<double>(l);
          acc.noalias() += m.transpose() * m;
        }
        acc /= static_cast<double>(n_);
        acc -= centered_mean_ * centered_mean_.transpose();
        acc = 0.5 * (acc + acc.transpose());
      }
      slot = std::move(acc);
    }
    return *slot;
  }

 private:
  Eigen::Index n_;
  Eigen::Index d_;
  Vector centered_mean_;
  Matrix prefix_;
  std::vector<std::optional<CovMatrix>> cache_;
};

inline CovMatrix block_mean_cov(const Series& s, Eigen::Index l) {
  require(l >= 1 && l <= s.n(), ErrorKind::kInvalidArgument, "block length must be in 1..n");
  BlockMeanCovTable table(s);
  return table.get(l);
}

// Conditional covariance of the generalized bootstrap mean:
//   f^2/n^2 [B(f) E N + Var N . mm^T] + c^2/n^2 [B(c) E g(N) + Var g(N) . mm^T]
//   + 1/n^2 [sum_i i^2 P(r(N)=i) B(i) + Var r(N) . mm^T]
// with f = floor(b), c = ceil(b), B(l) the covariance of one circular block
// mean of length l, and m the mean of the centered series. Because the block
// lengths always add up to n, the mm^T terms vanish after centering.
inline CovMatrix gbb_mean_cov_exact(BlockMeanCovTable& table, const BlockSize& bs) {
  const Eigen::Index n = table.n();
  bs.require_valid_for(n);
  const NLaw law = n_law(n, bs);
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double f = static_cast<double>(law.floor_b);
  const double c = static_cast<double>(law.ceil_b);
  const CovMatrix mm = table.centered_mean() * table.centered_mean().transpose();

  CovMatrix cov = (f * f / nn) * (table.get(law.floor_b) * law.mean_n() + law.var_n() * mm);
  if (!bs.is_integer())
    cov += (c * c / nn) * (table.get(law.ceil_b) * law.mean_g() + law.var_g() * mm);
  const auto r_law = law.r_law();
  CovMatrix tail = law.var_r() * mm;
  for (std::size_t i = 1; i < r_law.size(); ++i)
    if (r_law[i] > 0.0)
      tail += static_cast<double>(i * i) * r_law[i] * table.get(static_cast<Eigen::Index>(i));
  cov += tail / nn;
  return cov;
}

inline CovMatrix gbb_mean_cov_exact(const Series& s, const BlockSize& bs) {
  BlockMeanCovTable table(s);
  return gbb_mean_cov_exact(table, bs);
}

// Classical CBB with integer b: floor(n/b) full blocks plus one truncated
// block of length n mod b.
inline CovMatrix cbb_mean_cov_exact(const Series& s, Eigen::Index b) {
  require(b >= 1 && b <= s.n(), ErrorKind::kInvalidArgument, "block length must be in 1..n");
  BlockMeanCovTable table(s);
  const Eigen::Index full = s.n() / b;
  const Eigen::Index rem = s.n() % b;
  const double nn = static_cast<double>(s.n()) * static_cast<double>(s.n());
  return (static_cast<double>(full * b * b) * table.get(b) +
          static_cast<double>(rem * rem) * table.get(rem)) /
         nn;
}

struct McCovEstimate {
  CovMatrix cov;
  Matrix std_error;  // per-entry Monte Carlo standard error
  Matrix replicate_means;  // reps x d
};

// Empirical covariance of `reps` generalized-bootstrap sample means.
inline McCovEstimate gbb_mean_cov_mc(const Series& s, const BlockSize& bs, Eigen::Index reps,
                                     std::uint64_t seed, int threads = 1) {
  require(reps >= 100, ErrorKind::kInvalidArgument, "need at least 100 replicates");
  bs.require_valid_for(s.n());
  const Eigen::Index n = s.n();
  const Eigen::Index d = s.d();
  Matrix means(reps, d);
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    Engine engine = make_engine(seed, r);
    const auto blocks = draw_blocks(n, bs, engine);
    RowVector acc = RowVector::Zero(d);
    for (const auto& b : blocks)
      for (Eigen::Index j = 0; j < b.length; ++j) acc += s.row(circular_row(n, b.start + j));
    means.row(static_cast<Eigen::Index>(r)) = acc / static_cast<double>(n);
  });

  const Matrix dev = means.rowwise() - means.colwise().mean();
  const double r = static_cast<double>(reps);
  McCovEstimate est;
  est.cov = dev.transpose() * dev / (r - 1.0);
  est.std_error = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const Vector prod = dev.col(i).cwiseProduct(dev.col(j));
      const double mean = prod.mean();
      const double var = (prod.array() - mean).square().sum() / (r - 1.0);
      est.std_error(i, j) = std::sqrt(var / r);
    }
  est.replicate_means = std::move(means);
  return est;
}

}  // namespace gbb
