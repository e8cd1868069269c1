#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "gbb/block_bootstrap.hpp"
#include "gbb/io.hpp"
#include "test_support.hpp"

using namespace gbb;
using gbb::testing::normal_series;

namespace {

Series ar_series(Eigen::Index n, Eigen::Index d, double phi, unsigned seed) {
  std::mt19937_64 rng(seed);
  Matrix z = gbb::testing::normal_matrix(rng, n, d);
  for (Eigen::Index t = 1; t < n; ++t) z.row(t) += phi * z.row(t - 1);
  return Series(z);
}

// Law of N by walking every sequence of block lengths with its probability.
std::map<Eigen::Index, double> enumerate_n_law(Eigen::Index n, double b) {
  const auto f = static_cast<Eigen::Index>(std::floor(b));
  const auto c = static_cast<Eigen::Index>(std::ceil(b));
  const double p = b - std::floor(b);
  std::map<Eigen::Index, double> law;
  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index total,
                                                                     Eigen::Index k, double prob) {
    if (total >= n) {
      law[k] += prob;
      return;
    }
    const bool fits_f = total + f <= n;
    if (f == c) {
      walk(total + f, k + (fits_f ? 1 : 0), prob);
      return;
    }
    walk(total + f, k + (fits_f ? 1 : 0), prob * (1 - p));
    walk(total + c, k, prob * p);
  };
  walk(0, 0, 1.0);
  return law;
}

// Direct enumeration of circular block means, no prefix sums.
Matrix brute_block_mean_cov(const Series& s, Eigen::Index l) {
  const Eigen::Index n = s.n();
  const Vector xbar = sample_mean(s);
  Matrix acc = Matrix::Zero(s.d(), s.d());
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector m = Vector::Zero(s.d());
    for (Eigen::Index j = 0; j < l; ++j) m += s.row((k + j) % n).transpose();
    m /= double(l);
    acc += (m - xbar) * (m - xbar).transpose();
  }
  return acc / double(n);
}

}  // namespace

TEST(BlockSize, FloorCeilAndProbability) {
  const BlockSize bs(6.51);
  EXPECT_EQ(bs.floor_length(), 6);
  EXPECT_EQ(bs.ceil_length(), 7);
  EXPECT_DOUBLE_EQ(bs.p_up(), 6.51 - 6.0);
  EXPECT_FALSE(bs.is_integer());

  const BlockSize integer(5.0);
  EXPECT_EQ(integer.floor_length(), 5);
  EXPECT_EQ(integer.ceil_length(), 5);
  EXPECT_EQ(integer.p_up(), 0.0);
  EXPECT_TRUE(integer.is_integer());
}

TEST(BlockSize, Validation) {
  EXPECT_THROW(BlockSize(0.5), Error);
  EXPECT_THROW(BlockSize(std::nan("")), Error);
  EXPECT_THROW(BlockSize{std::numeric_limits<double>::infinity()}, Error);
  EXPECT_THROW(BlockSize(10.5).require_valid_for(10), Error);
  EXPECT_NO_THROW(BlockSize(10.0).require_valid_for(10));
}

TEST(CbbSample, FullCircleBlockIsRotation) {
  const Series s = ar_series(9, 2, 0.3, 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto bs = cbb_sample(s, 9, 1, seed);
    ASSERT_EQ(bs.block_log.size(), 1u);
    const auto start = bs.block_log[0].start;
    for (Eigen::Index t = 0; t < 9; ++t)
      EXPECT_EQ(bs.values.row(t), s.row((start - 1 + t) % 9));
  }
}

TEST(CbbSample, UnitBlocksAreIidDraws) {
  const Series s = Series::from_rows({{1}, {2}, {3}, {4}, {5}});
  std::map<double, int> counts;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto bs = cbb_sample(s, 1, 5, seed);
    ASSERT_EQ(bs.values.n(), 5);
    for (Eigen::Index t = 0; t < 5; ++t) ++counts[bs.values(t, 0)];
  }
  ASSERT_EQ(counts.size(), 5u);
  double chi2 = 0;
  for (const auto& [v, c] : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  EXPECT_GT(boost::math::gamma_q(2.0, chi2 / 2), 0.001);
}

TEST(CbbSample, LengthAndDeterminism) {
  const Series s = ar_series(20, 2, 0.5, 2);
  const auto a = cbb_sample(s, 3, 4, 77);
  EXPECT_EQ(a.values.n(), 12);
  EXPECT_EQ(a.values.values(), cbb_sample(s, 3, 4, 77).values.values());
  EXPECT_THROW(cbb_sample(s, 21, 1, 0), Error);
  EXPECT_THROW(cbb_sample(s, 3, 0, 0), Error);
}

TEST(CbbSample, ReplicateMeansCenterOnSampleMean) {
  const Series s = ar_series(50, 2, 0.5, 3);
  const Eigen::Index reps = 10000;
  Matrix means(reps, 2);
  for (Eigen::Index r = 0; r < reps; ++r)
    means.row(r) = cbb_sample(s, 5, 10, static_cast<std::uint64_t>(r)).values.values().colwise().mean();
  const Vector xbar = sample_mean(s);
  const Matrix dev = means.rowwise() - means.colwise().mean();
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double se = std::sqrt(dev.col(j).squaredNorm() / (reps - 1) / reps);
    EXPECT_LT(std::abs(means.col(j).mean() - xbar(j)), 4 * se);
  }
}

TEST(GbbSample, BlockLogInvariants) {
  const Series s = ar_series(103, 2, 0.4, 4);
  for (double b : {1.0, 2.5, 5.0, 6.51, 9.34, 103.0}) {
    const BlockSize bs(b);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto sample = gbb_sample(s, bs, seed);
      Eigen::Index total = 0;
      for (std::size_t i = 0; i < sample.block_log.size(); ++i) {
        const auto& blk = sample.block_log[i];
        total += blk.length;
        EXPECT_GE(blk.start, 1);
        EXPECT_LE(blk.start, 103);
        if (i + 1 < sample.block_log.size())
          EXPECT_TRUE(blk.length == bs.floor_length() || blk.length == bs.ceil_length());
        else
          EXPECT_LE(blk.length, bs.ceil_length());
      }
      EXPECT_EQ(total, 103);
      EXPECT_EQ(sample.values.n(), 103);
    }
  }
}

TEST(GbbSample, IntegerBlocksHaveExactLength) {
  const Series s = ar_series(47, 1, 0.0, 5);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto sample = gbb_sample(s, BlockSize(5.0), seed);
    for (std::size_t i = 0; i + 1 < sample.block_log.size(); ++i) EXPECT_EQ(sample.block_log[i].length, 5);
    EXPECT_EQ(sample.block_log.back().length, 2);
  }
}

TEST(GbbSample, CeilFractionMatchesBernoulli) {
  const BlockSize bs(2.5);
  Engine engine = make_engine(2024);
  long ceil_blocks = 0, full = 0;
  while (full < 100000) {
    const auto blocks = draw_blocks(1000, bs, engine);
    for (std::size_t i = 0; i + 1 < blocks.size() && full < 100000; ++i, ++full)
      ceil_blocks += blocks[i].length == 3;
  }
  const double frac = double(ceil_blocks) / double(full);
  EXPECT_GE(frac, 0.495);
  EXPECT_LE(frac, 0.505);
}

TEST(GbbSample, PseudoMeanCentersOnSampleMean) {
  const Series s = ar_series(60, 2, 0.6, 6);
  const auto est = gbb_mean_cov_mc(s, BlockSize(4.3), 20000, 8);
  const Vector xbar = sample_mean(s);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double se = std::sqrt(est.cov(j, j) / 20000.0);
    EXPECT_LT(std::abs(est.replicate_means.col(j).mean() - xbar(j)), 4 * se);
  }
}

TEST(GbbSample, BlockLogCsv) {
  const auto sample = gbb_sample(ar_series(10, 1, 0, 1), BlockSize(3.5), 3);
  std::ostringstream os;
  write_block_log_csv(os, sample.block_log);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "start,length");
  Eigen::Index total = 0;
  while (std::getline(in, line)) total += std::stol(line.substr(line.find(',') + 1));
  EXPECT_EQ(total, 10);
}

TEST(NLaw, HandEnumeratedCase) {
  // n=3, b=1.5 (p=1/2): (1,1,1) N=3, (1,1,2->1) N=2, (1,2) and (2,1) N=1, (2,2->1) N=0.
  const NLaw law = n_law(3, BlockSize(1.5));
  std::map<Eigen::Index, double> got;
  for (const auto& pt : law.points) got[pt.k] = pt.prob;
  EXPECT_NEAR(got[3], 0.125, 1e-15);
  EXPECT_NEAR(got[2], 0.125, 1e-15);
  EXPECT_NEAR(got[1], 0.5, 1e-15);
  EXPECT_NEAR(got[0], 0.25, 1e-15);
}

TEST(NLaw, MatchesExhaustiveEnumeration) {
  for (Eigen::Index n : {3, 4, 7, 10, 13}) {
    for (double b : {1.0, 1.5, 1.3, 2.0, 2.7, 3.5}) {
      if (b > double(n)) continue;
      const auto expected = enumerate_n_law(n, b);
      const NLaw law = n_law(n, BlockSize(b));
      double total = 0;
      std::map<Eigen::Index, double> got;
      for (const auto& pt : law.points) {
        got[pt.k] += pt.prob;
        total += pt.prob;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      for (const auto& [k, p] : expected) EXPECT_NEAR(got[k], p, 1e-12) << "n=" << n << " b=" << b << " k=" << k;
      for (const auto& [k, p] : got) EXPECT_TRUE(expected.count(k) || p == 0.0);
    }
  }
}

TEST(NLaw, BookkeepingIdentity) {
  for (Eigen::Index n : {50, 97, 200}) {
    for (double b : {1.0, 1.01, 2.5, 6.51, 9.34, 20.43, 32.35}) {
      const NLaw law = n_law(n, BlockSize(b));
      double total = 0;
      for (const auto& pt : law.points) {
        EXPECT_EQ(pt.k * law.floor_b + pt.g * law.ceil_b + pt.r, n);
        EXPECT_GE(pt.r, 0);
        EXPECT_LE(pt.r, law.floor_b);
        EXPECT_GE(pt.prob, 0.0);
        total += pt.prob;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(NLaw, IntegerDivisorIsDegenerate) {
  const NLaw law = n_law(60, BlockSize(5.0));
  ASSERT_EQ(law.points.size(), 1u);
  EXPECT_EQ(law.points[0].k, 12);
  EXPECT_EQ(law.points[0].g, 0);
  EXPECT_EQ(law.points[0].r, 0);
  EXPECT_DOUBLE_EQ(law.points[0].prob, 1.0);
}

TEST(NLaw, MatchesSimulatedLaw) {
  const Eigen::Index n = 40;
  const BlockSize bs(2.7);
  const NLaw law = n_law(n, bs);
  // Independent simulation of the stopping protocol.
  std::map<Eigen::Index, long> counts;
  std::mt19937_64 rng(99);
  std::bernoulli_distribution up(bs.p_up());
  const long draws = 1000000;
  for (long i = 0; i < draws; ++i) {
    Eigen::Index total = 0, k = 0;
    while (total < n) {
      const Eigen::Index len = up(rng) ? 3 : 2;
      if (len == 2 && total + 2 <= n) ++k;
      total += len;
    }
    ++counts[k];
  }
  // Chi-square goodness of fit, pooling sparse cells into their neighbours.
  double chi2 = 0, pooled_e = 0, pooled_o = 0;
  int cells = 0;
  for (const auto& pt : law.points) {
    pooled_e += pt.prob * draws;
    pooled_o += counts[pt.k];
    if (pooled_e >= 20) {
      chi2 += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
      ++cells;
      pooled_e = pooled_o = 0;
    }
  }
  if (pooled_e > 0) chi2 += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e, ++cells;
  EXPECT_GT(boost::math::gamma_q((cells - 1) / 2.0, chi2 / 2), 0.001);
}

TEST(BlockMeanCov, MatchesBruteForce) {
  const Series s = ar_series(23, 3, 0.5, 7);
  for (Eigen::Index l : {1, 2, 5, 11, 22, 23})
    EXPECT_TRUE(block_mean_cov(s, l).isApprox(brute_block_mean_cov(s, l), 1e-10) ||
                (block_mean_cov(s, l) - brute_block_mean_cov(s, l)).norm() < 1e-13)
        << l;
}

TEST(BlockMeanCov, FullLengthIsZeroAndUnitIsSampleCovariance) {
  const Series s = ar_series(31, 2, 0.3, 8);
  EXPECT_LT(block_mean_cov(s, 31).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(block_mean_cov(s, 1).isApprox(sample_autocov(s, 0), 1e-12));
  EXPECT_THROW(block_mean_cov(s, 0), Error);
  EXPECT_THROW(block_mean_cov(s, 32), Error);
}

TEST(BlockMeanCov, MatchesSampledBlockMeans) {
  const Series s = ar_series(40, 2, 0.6, 9);
  const Eigen::Index l = 6;
  const Eigen::Index reps = 100000;
  Engine engine = make_engine(5);
  std::uniform_int_distribution<std::int64_t> start(1, 40);
  Matrix m(reps, 2);
  for (Eigen::Index r = 0; r < reps; ++r) {
    const auto k = start(engine);
    RowVector acc = RowVector::Zero(2);
    for (Eigen::Index j = 0; j < l; ++j) acc += circular_index(s, k + j);
    m.row(r) = acc / double(l);
  }
  const Vector xbar = sample_mean(s);
  const Matrix dev = m.rowwise() - xbar.transpose();
  const Matrix exact = block_mean_cov(s, l);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      const Vector prod = dev.col(i).cwiseProduct(dev.col(j));
      const double se = std::sqrt((prod.array() - prod.mean()).square().sum() / (reps - 1) / reps);
      EXPECT_LT(std::abs(prod.mean() - exact(i, j)), 3 * se) << i << j;
    }
}

TEST(GbbMeanCovExact, IntegerDivisorReducesToSingleBlockTerm) {
  const Series s = ar_series(60, 2, 0.5, 10);
  for (Eigen::Index b : {1, 2, 3, 5, 12, 60}) {
    const Matrix expected = double(b) / 60.0 * block_mean_cov(s, b);
    EXPECT_TRUE((gbb_mean_cov_exact(s, BlockSize(double(b))) - expected).norm() <= 1e-12 * (1 + expected.norm()));
  }
}

TEST(GbbMeanCovExact, IntegerBlockSizeEqualsClassicalCbb) {
  const Series s = ar_series(97, 2, 0.5, 11);
  for (Eigen::Index b : {1, 2, 5, 10, 13, 50}) {
    const Matrix gen = gbb_mean_cov_exact(s, BlockSize(double(b)));
    const Matrix cbb = cbb_mean_cov_exact(s, b);
    EXPECT_LT((gen - cbb).cwiseAbs().maxCoeff(), 1e-12) << b;
  }
}

TEST(GbbMeanCovExact, ContinuousAtIntegers) {
  const Series s = ar_series(120, 2, 0.7, 12);
  BlockMeanCovTable table(s);
  for (int k = 2; k <= 20; ++k) {
    const double at = gbb_mean_cov_exact(table, BlockSize(k)).trace();
    const double below = gbb_mean_cov_exact(table, BlockSize(k - 1e-6)).trace();
    const double above = gbb_mean_cov_exact(table, BlockSize(k + 1e-6)).trace();
    EXPECT_LT(std::abs(below - at), 1e-4 * at) << k;
    EXPECT_LT(std::abs(above - at), 1e-4 * at) << k;
  }
}

TEST(GbbMeanCovExact, PositiveTraceAndSymmetric) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const Series s = normal_series(rng, 30 + rep, 2);
    for (double b : {1.0, 1.7, 3.2, 7.9, 15.0}) {
      const Matrix c = gbb_mean_cov_exact(s, BlockSize(b));
      EXPECT_GT(c.trace(), 0.0);
      EXPECT_TRUE(is_symmetric(c));
    }
  }
}

TEST(GbbMeanCovExact, ConstantSeriesIsZero) {
  const Series s(Matrix::Constant(25, 2, 4.2));
  EXPECT_LT(gbb_mean_cov_exact(s, BlockSize(3.3)).cwiseAbs().maxCoeff(), 1e-25);
}

TEST(GbbMeanCovExact, AgreesWithMonteCarlo) {
  const std::vector<std::pair<Eigen::Index, double>> cases = {{40, 2.5}, {50, 6.51}, {37, 9.34}, {60, 1.3}};
  unsigned seed = 20;
  for (const auto& [n, b] : cases) {
    const Series s = ar_series(n, 2, 0.5, seed++);
    const Matrix exact = gbb_mean_cov_exact(s, BlockSize(b));
    const auto mc = gbb_mean_cov_mc(s, BlockSize(b), 40000, seed);
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j)
        EXPECT_LT(std::abs(mc.cov(i, j) - exact(i, j)), 4 * mc.std_error(i, j))
            << "n=" << n << " b=" << b << " (" << i << "," << j << ")";
  }
}

TEST(GbbMeanCovMc, DeterministicAndThreadIndependent) {
  const Series s = ar_series(30, 2, 0.4, 30);
  const auto a = gbb_mean_cov_mc(s, BlockSize(3.4), 500, 1, 1);
  const auto b = gbb_mean_cov_mc(s, BlockSize(3.4), 500, 1, 4);
  EXPECT_EQ(a.replicate_means, b.replicate_means);
  EXPECT_EQ(a.cov, b.cov);
  EXPECT_THROW(gbb_mean_cov_mc(s, BlockSize(3.4), 99, 1), Error);
}

TEST(GbbMeanCovMc, ConstantSeriesGivesZero) {
  const Series s(Matrix::Constant(20, 2, -1.25));
  const auto est = gbb_mean_cov_mc(s, BlockSize(2.5), 200, 3);
  EXPECT_TRUE(est.cov.isZero(0.0));
}

TEST(GbbMeanCovMc, UnitBlocksMatchIidBootstrap) {
  const Series s = ar_series(45, 2, 0.2, 31);
  const auto est = gbb_mean_cov_mc(s, BlockSize(1.0), 40000, 4);
  const Matrix expected = sample_autocov(s, 0) / 45.0;
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      EXPECT_LT(std::abs(est.cov(i, j) - expected(i, j)), 4 * est.std_error(i, j));
}

TEST(GbbMeanCovMc, ErrorShrinksWithReplicates) {
  const Series s = ar_series(30, 2, 0.5, 32);
  const BlockSize bs(3.6);
  const Matrix exact = gbb_mean_cov_exact(s, bs);
  std::vector<double> medians;
  for (Eigen::Index reps : {1000, 10000, 100000}) {
    std::vector<double> err;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      err.push_back((gbb_mean_cov_mc(s, bs, reps, 100 + seed).cov - exact).norm());
    std::nth_element(err.begin(), err.begin() + 10, err.end());
    medians.push_back(err[10]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}
