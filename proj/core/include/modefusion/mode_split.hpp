#pragma once

#include "modefusion/labeled_matrix.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace modefusion {

inline constexpr std::array<std::string_view, 4> kModeLabels = {"mass-transit", "motorised",
                                                                 "active", "taxi"};

enum class Mode : std::size_t { MassTransit = 0, Motorised = 1, Active = 2, Taxi = 3 };

[[nodiscard]] std::vector<std::string> mode_labels();
/// Index into kModeLabels; throws ValidationError for an unknown name.
[[nodiscard]] std::size_t mode_index(std::string_view name);

/// Municipality x {mass-transit, motorised, active, taxi} trip counts.
struct ModeSplit {
  std::vector<std::string> municipalities;
  Matrix counts;  // n x 4

  [[nodiscard]] double at(std::size_t municipality, Mode mode) const {
    return counts(static_cast<Eigen::Index>(municipality), static_cast<Eigen::Index>(mode));
  }
  [[nodiscard]] Vector column(Mode mode) const {
    return counts.col(static_cast<Eigen::Index>(mode));
  }

  /// Accepts any column order; columns are aligned to kModeLabels.
  static ModeSplit from_labeled(const LabeledMatrix& m);
  [[nodiscard]] LabeledMatrix to_labeled() const;
  /// Rows reordered to `order`, a permutation of `municipalities`.
  [[nodiscard]] ModeSplit aligned_to(const std::vector<std::string>& order) const;
};

}  // namespace modefusion
