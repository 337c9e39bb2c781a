#pragma once

#include <string>
#include <vector>

#include "nlgm/data_ingest.hpp"
#include "oracle.hpp"

namespace testutil {

inline nlgm::ScoreMatrix to_matrix(const oracle::Mat& rows) {
  nlgm::ScoreMatrix m;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto J = static_cast<Eigen::Index>(rows.at(0).size());
  m.values.resize(n, J);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.candidates.push_back("c" + std::to_string(i));
    for (Eigen::Index j = 0; j < J; ++j) m.values(i, j) = rows[i][j];
  }
  for (Eigen::Index j = 0; j < J; ++j) m.items.push_back("i" + std::to_string(j));
  m.label = "m";
  return m;
}

inline oracle::Mat to_rows(const nlgm::ScoreMatrix& m) {
  oracle::Mat rows(m.n_candidates(), oracle::Vec(m.n_items()));
  for (Eigen::Index i = 0; i < m.n_candidates(); ++i)
    for (Eigen::Index j = 0; j < m.n_items(); ++j) rows[i][j] = m.values(i, j);
  return rows;
}

inline oracle::Vec to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline oracle::Mat to_rows(const Eigen::MatrixXd& m) {
  oracle::Mat rows(m.rows(), oracle::Vec(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  return rows;
}

}  // namespace testutil
