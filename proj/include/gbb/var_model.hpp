#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "gbb/error.hpp"
#include "gbb/rng.hpp"
#include "gbb/series.hpp"

namespace gbb {

// Zero-mean VAR(p): x_t = A_1 x_{t-1} + ... + A_p x_{t-p} + e_t, Cov(e_t) = C.
class VarModel {
 public:
  VarModel(std::vector<Matrix> coeffs, Matrix innov_cov)
      : coeffs_(std::move(coeffs)), innov_cov_(std::move(innov_cov)) {
    require(!coeffs_.empty(), ErrorKind::kInvalidArgument, "VAR order must be >= 1");
    const Eigen::Index d = innov_cov_.rows();
    require(d >= 1 && innov_cov_.cols() == d, ErrorKind::kDimensionMismatch,
            "innovation covariance must be square");
    for (const auto& a : coeffs_)
      require(a.rows() == d && a.cols() == d, ErrorKind::kDimensionMismatch,
              "coefficient matrices must be d x d");
    require(is_symmetric(innov_cov_), ErrorKind::kInvalidArgument,
            "innovation covariance must be symmetric");
    Eigen::LLT<Matrix> llt(innov_cov_);
    require(llt.info() == Eigen::Success, ErrorKind::kInvalidArgument,
            "innovation covariance must be positive definite");
    chol_ = llt.matrixL();
  }

  int p() const { return static_cast<int>(coeffs_.size()); }
  Eigen::Index d() const { return innov_cov_.rows(); }
  const std::vector<Matrix>& coeffs() const { return coeffs_; }
  const Matrix& coeff(int lag) const { return coeffs_.at(static_cast<std::size_t>(lag - 1)); }
  const Matrix& innov_cov() const { return innov_cov_; }
  const Matrix& innov_chol() const { return chol_; }

 private:
  std::vector<Matrix> coeffs_;
  Matrix innov_cov_;
  Matrix chol_;
};

// VAR(1) rewrite of a VAR(p) on the stacked state (x_t, ..., x_{t-p+1}).
struct CompanionForm {
  Matrix A;  // dp x dp
  Matrix E;  // dp x dp, C in the upper-left block
};

struct LagSelection {
  int chosen_p = 1;
  std::vector<std::pair<int, double>> scores;  // (p, AIC)
};

struct Stationarity {
  bool stationary = false;
  double spectral_radius = 0.0;
};

inline constexpr double kStationarityMargin = 1e-10;

inline CompanionForm companion(const VarModel& m) {
  const Eigen::Index d = m.d();
  const Eigen::Index dp = d * m.p();
  CompanionForm cf{Matrix::Zero(dp, dp), Matrix::Zero(dp, dp)};
  for (int i = 0; i < m.p(); ++i) cf.A.block(0, i * d, d, d) = m.coeffs()[static_cast<std::size_t>(i)];
  if (m.p() > 1) cf.A.block(d, 0, dp - d, dp - d).setIdentity();
  cf.E.topLeftCorner(d, d) = m.innov_cov();
  return cf;
}

inline double spectral_radius(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  require(es.info() == Eigen::Success, ErrorKind::kNumerical, "eigenvalue solve failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Stationarity is_stationary(const VarModel& m) {
  const double rho = spectral_radius(companion(m).A);
  return {rho < 1.0 - kStationarityMargin, rho};
}

inline void require_stationary(const VarModel& m) {
  const auto st = is_stationary(m);
  require(st.stationary, ErrorKind::kNotStationary,
          "companion spectral radius " + std::to_string(st.spectral_radius) + " >= 1");
}

// Repeated squaring; works for defective matrices too.
inline Matrix matrix_power(const Matrix& a, std::int64_t h) {
  require(h >= 0, ErrorKind::kInvalidArgument, "negative matrix power");
  Matrix result = Matrix::Identity(a.rows(), a.cols());
  Matrix base = a;
  while (h > 0) {
    if (h & 1) result = result * base;
    h >>= 1;
    if (h > 0) base = base * base;
  }
  return result;
}

inline Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

// Relative residual of G - A G A^T = E.
inline double lyapunov_residual(const CompanionForm& cf, const Matrix& gamma) {
  const Matrix r = gamma - cf.A * gamma * cf.A.transpose() - cf.E;
  return r.norm() / cf.E.norm();
}

// Stationary covariance of the companion state, from
// (I - A (x) A) vec(G) = vec(E).
inline Matrix gamma_y0(const VarModel& m) {
  require_stationary(m);
  const CompanionForm cf = companion(m);
  const Eigen::Index dp = cf.A.rows();
  const Matrix lhs = Matrix::Identity(dp * dp, dp * dp) - kronecker(cf.A, cf.A);
  const Vector rhs = Eigen::Map<const Vector>(cf.E.data(), dp * dp);
  const Vector sol = lhs.partialPivLu().solve(rhs);
  Matrix gamma = Eigen::Map<const Matrix>(sol.data(), dp, dp);
  gamma = 0.5 * (gamma + gamma.transpose());
  require(lyapunov_residual(cf, gamma) < 1e-8, ErrorKind::kNumerical,
          "Lyapunov solve residual too large");
  return gamma;
}

// Gamma_X(h) = E(x_{t+h} x_t^T), upper-left block of A^h Gamma_Y(0).
inline CovMatrix autocov(const VarModel& m, std::int64_t h) {
  require(h >= 0, ErrorKind::kInvalidLag, "lag must be >= 0");
  const Matrix g0 = gamma_y0(m);
  const Matrix a = companion(m).A;
  const Eigen::Index d = m.d();
  if (h == 0) return g0.topLeftCorner(d, d);
  return (matrix_power(a, h) * g0).topLeftCorner(d, d);
}

// tr(G(0)) + 2 sum_{h>=1} tr(G(h)), summed until the geometric tail bound
// drops below tail_tol.
inline double mean_cov_trace_truncated(const VarModel& m, double tail_tol = 1e-10) {
  require_stationary(m);
  const Matrix g0 = gamma_y0(m);
  const Matrix a = companion(m).A;
  const Eigen::Index d = m.d();
  const double rho = spectral_radius(a);
  const double g0_norm = g0.norm();
  double total = g0.topLeftCorner(d, d).trace();
  Matrix power = Matrix::Identity(a.rows(), a.cols());
  constexpr std::int64_t kMaxLag = 50'000'000;
  for (std::int64_t h = 1; h <= kMaxLag; ++h) {
    power = a * power;
    total += 2.0 * (power * g0).topLeftCorner(d, d).trace();
    const double tail = 2.0 * power.norm() * g0_norm * std::sqrt(static_cast<double>(a.rows())) /
                        std::max(1.0 - rho, 1e-300);
    if (tail < tail_tol * std::max(1.0, std::abs(total))) break;
  }
  return total;
}

// Limit of n * tr(Cov(mean of x_1..x_n)): the trace of the long-run
// covariance (I - sum A_i)^{-1} C (I - sum A_i)^{-T}. The truncated
// autocovariance sum is evaluated alongside and must agree.
inline double mean_cov_trace_limit(const VarModel& m) {
  require_stationary(m);
  const Eigen::Index d = m.d();
  Matrix s = Matrix::Identity(d, d);
  for (const auto& a : m.coeffs()) s -= a;
  const Matrix s_inv = s.inverse();
  const double closed = (s_inv * m.innov_cov() * s_inv.transpose()).trace();
  const double truncated = mean_cov_trace_truncated(m);
  require(std::abs(closed - truncated) <= 1e-8 * std::abs(closed), ErrorKind::kNumerical,
          "long-run trace closed form and truncated sum disagree");
  return closed;
}

namespace detail {

// Lagged design on the centered series: rows t = first..n-1 (0-based),
// regressors (x_{t-1}, ..., x_{t-p}).
inline void lagged_design(const Matrix& x, int p, Eigen::Index first, Matrix& z, Matrix& y) {
  const Eigen::Index d = x.cols();
  const Eigen::Index rows = x.rows() - first;
  z.resize(rows, d * p);
  y = x.bottomRows(rows);
  for (int lag = 1; lag <= p; ++lag)
    z.block(0, (lag - 1) * d, rows, d) = x.middleRows(first - lag, rows);
}

struct LsFit {
  std::vector<Matrix> coeffs;
  Matrix resid;
};

inline LsFit least_squares(const Matrix& z, const Matrix& y, int p, Eigen::Index d) {
  Eigen::ColPivHouseholderQR<Matrix> qr(z);
  qr.setThreshold(1e-10);
  require(qr.rank() == z.cols(), ErrorKind::kRankDeficient,
          "regressor cross-product matrix is singular");
  const Matrix b = qr.solve(y);  // dp x d
  LsFit fit;
  for (int lag = 0; lag < p; ++lag) fit.coeffs.push_back(b.middleRows(lag * d, d).transpose());
  fit.resid = y - z * b;
  return fit;
}

}  // namespace detail

// Multivariate least squares on the mean-centered series.
inline VarModel fit_var(const Series& s, int p) {
  require(p >= 1, ErrorKind::kInvalidArgument, "VAR order must be >= 1");
  require(s.n() > s.d() * p + 1, ErrorKind::kInsufficientData,
          "need n > d*p + 1 observations");
  const Matrix x = centered(s).values();
  Matrix z, y;
  detail::lagged_design(x, p, p, z, y);
  auto fit = detail::least_squares(z, y, p, s.d());
  Matrix c = fit.resid.transpose() * fit.resid / static_cast<double>(s.n() - p);
  c = 0.5 * (c + c.transpose());
  Eigen::LLT<Matrix> llt(c);
  require(llt.info() == Eigen::Success, ErrorKind::kRankDeficient,
          "residual covariance is singular");
  return VarModel(std::move(fit.coeffs), std::move(c));
}

// AIC(p) = n_eff log det(Sigma_p) + 2 d^2 p on the common sample
// t = p_max+1..n, so that all candidate orders see the same responses.
inline LagSelection select_lag_aic(const Series& s, int p_max) {
  require(p_max >= 1, ErrorKind::kInvalidArgument, "p_max must be >= 1");
  require(s.n() > s.d() * p_max + 1, ErrorKind::kInsufficientData,
          "need n > d*p_max + 1 observations");
  const Matrix x = centered(s).values();
  const Eigen::Index d = s.d();
  const double n_eff = static_cast<double>(s.n() - p_max);
  LagSelection sel;
  double best = std::numeric_limits<double>::infinity();
  for (int p = 1; p <= p_max; ++p) {
    Matrix z, y;
    detail::lagged_design(x, p, p_max, z, y);
    auto fit = detail::least_squares(z, y, p, d);
    const Matrix sigma = fit.resid.transpose() * fit.resid / n_eff;
    Eigen::LLT<Matrix> llt(sigma);
    require(llt.info() == Eigen::Success, ErrorKind::kRankDeficient,
            "residual covariance is singular");
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double aic = n_eff * log_det + 2.0 * static_cast<double>(d * d * p);
    sel.scores.emplace_back(p, aic);
    if (aic < best) {
      best = aic;
      sel.chosen_p = p;
    }
  }
  return sel;
}

inline Series simulate(const VarModel& m, Eigen::Index n, std::uint64_t seed) {
  require_stationary(m);
  require(n >= 1, ErrorKind::kInvalidArgument, "n must be >= 1");
  const Eigen::Index d = m.d();
  const int p = m.p();
  const Eigen::Index burn = std::max<Eigen::Index>(10 * p, 1000);
  const Eigen::Index total = burn + n;
  Engine engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x = Matrix::Zero(total, d);
  Vector z(d);
  for (Eigen::Index t = 0; t < total; ++t) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(engine);
    Vector xt = m.innov_chol() * z;
    for (int lag = 1; lag <= p && lag <= t; ++lag)
      xt.noalias() += m.coeff(lag) * x.row(t - lag).transpose();
    x.row(t) = xt.transpose();
  }
  return Series(x.bottomRows(n));
}

// e_t = x_t - sum A_i x_{t-i} for t = p+1..n on the centered series.
inline Series residuals(const VarModel& m, const Series& s) {
  require(s.d() == m.d(), ErrorKind::kDimensionMismatch, "series/model dimension mismatch");
  require(s.n() > m.p(), ErrorKind::kInsufficientData, "series shorter than model order");
  const Matrix x = centered(s).values();
  const Eigen::Index p = m.p();
  Matrix e = x.bottomRows(s.n() - p);
  for (int lag = 1; lag <= m.p(); ++lag)
    e.noalias() -= x.middleRows(p - lag, s.n() - p) * m.coeff(lag).transpose();
  return Series(std::move(e));
}

struct LjungBoxResult {
  int lags = 0;
  std::vector<double> statistic;  // per component
  std::vector<double> p_value;    // per component
  double min_p_value = 1.0;
};

inline double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

// Per-component Q = n(n+2) sum_{h<=L} r_h^2/(n-h) against chi2(L).
inline LjungBoxResult ljung_box(const Series& res, int lags = 20) {
  require(lags >= 1 && lags < res.n(), ErrorKind::kInvalidLag,
          "Ljung-Box lags must satisfy 1 <= L < n");
  const Matrix c = centered(res).values();
  const double n = static_cast<double>(res.n());
  LjungBoxResult out;
  out.lags = lags;
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    const auto col = c.col(j);
    const double denom = col.squaredNorm();
    double q = 0.0;
    if (denom > 0.0) {
      for (int h = 1; h <= lags; ++h) {
        const Eigen::Index len = res.n() - h;
        const double r = col.tail(len).dot(col.head(len)) / denom;
        q += r * r / (n - h);
      }
      q *= n * (n + 2.0);
    }
    const double pv = chi_square_sf(q, lags);
    out.statistic.push_back(q);
    out.p_value.push_back(pv);
    out.min_p_value = std::min(out.min_p_value, pv);
  }
  return out;
}

}  // namespace gbb
