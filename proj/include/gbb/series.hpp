#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gbb/error.hpp"

namespace gbb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// d x d symmetric covariance-type matrix.
using CovMatrix = Eigen::MatrixXd;

// A multivariate time series: rows are time points, columns are components.
class Series {
 public:
  Series() = default;

  explicit Series(Matrix values) : values_(std::move(values)) {
    require(values_.rows() >= 1 && values_.cols() >= 1,
            ErrorKind::kInvalidArgument, "series needs n >= 1 and d >= 1");
    require(values_.allFinite(), ErrorKind::kMissingData,
            "series contains non-finite values");
  }

  static Series from_rows(const std::vector<std::vector<double>>& rows) {
    require(!rows.empty(), ErrorKind::kInvalidArgument, "empty row list");
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].size() == rows.front().size(),
              ErrorKind::kDimensionMismatch, "ragged rows");
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return Series(std::move(m));
  }

  Eigen::Index n() const { return values_.rows(); }
  Eigen::Index d() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

  double operator()(Eigen::Index t, Eigen::Index j) const { return values_(t, j); }
  auto row(Eigen::Index t) const { return values_.row(t); }

  Series rows(Eigen::Index begin, Eigen::Index count) const {
    require(begin >= 0 && count >= 1 && begin + count <= n(),
            ErrorKind::kInvalidArgument, "row slice out of range");
    return Series(values_.middleRows(begin, count));
  }

  Series columns(const std::vector<Eigen::Index>& cols) const {
    Matrix m(n(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      require(cols[k] >= 0 && cols[k] < d(), ErrorKind::kInvalidArgument,
              "column index out of range");
      m.col(static_cast<Eigen::Index>(k)) = values_.col(cols[k]);
    }
    return Series(std::move(m));
  }

 private:
  Matrix values_;
};

inline Vector sample_mean(const Series& s) {
  return s.values().colwise().mean().transpose();
}

inline Series centered(const Series& s) {
  return Series(s.values().rowwise() - s.values().colwise().mean());
}

// Zero-based row of the wrapped series for a one-based time index t >= 1.
inline Eigen::Index circular_row(Eigen::Index n, std::int64_t t) {
  require(t >= 1, ErrorKind::kInvalidArgument, "circular index needs t >= 1");
  return static_cast<Eigen::Index>((t - 1) % n);
}

inline RowVector circular_index(const Series& s, std::int64_t t) {
  return s.row(circular_row(s.n(), t));
}

// Biased (divisor n) lag-h autocovariance, (1/n) sum (x_{t+h}-m)(x_t-m)^T.
inline CovMatrix sample_autocov(const Series& s, Eigen::Index h) {
  require(h >= 0 && h < s.n(), ErrorKind::kInvalidLag,
          "lag must satisfy 0 <= h < n");
  const Matrix c = centered(s).values();
  const Eigen::Index len = s.n() - h;
  return c.bottomRows(len).transpose() * c.topRows(len) /
         static_cast<double>(s.n());
}

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace gbb
