#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace modefusion {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense matrix with named rows and columns. This is the interchange unit for
/// every relation file read or written by the pipeline.
struct LabeledMatrix {
  std::string row_concept;
  std::string col_concept;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix values;

  [[nodiscard]] Eigen::Index rows() const { return values.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return values.cols(); }

  /// Throws ValidationError when label counts disagree with the matrix shape
  /// or labels repeat.
  void check_shape() const;

  /// Returns a copy whose rows follow `order`, which must be a permutation of
  /// row_labels.
  [[nodiscard]] LabeledMatrix with_row_order(const std::vector<std::string>& order) const;
  [[nodiscard]] LabeledMatrix with_col_order(const std::vector<std::string>& order) const;
  [[nodiscard]] LabeledMatrix transposed() const;
};

}  // namespace modefusion
