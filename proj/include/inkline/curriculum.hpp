#pragma once

#include <array>
#include <vector>

#include "inkline/dataset.hpp"

namespace inkline {

/// Short-to-long text-line categories used by staged training.
///
/// Character ranges are left-closed at 1 and otherwise half-open on the left:
/// [1, 24], (24, 48], (48, 88]. Widths are the stage's maximum image length.
struct CurriculumCategory {
  int id = 0;
  int min_chars = 0;  // inclusive
  int max_chars = 0;  // inclusive
  int min_width = 0;
  int max_width = 0;
};

inline constexpr std::array<CurriculumCategory, 3> kCurriculumCategories{{
    {1, 1, 24, 64, 600},
    {2, 25, 48, 600, 1200},
    {3, 49, 88, 1200, 2160},
}};

/// Category for a character count in [1, 88]; throws ContractViolation outside.
const CurriculumCategory& assign_category(int char_count);
const CurriculumCategory& assign_category(const TextLineSample& sample);

/// Smallest multiple of 16 that is >= width (the generator grid needs it).
int grid_width(int width);

/// Sample positions grouped by category id (index 0 -> category 1).
std::array<std::vector<std::size_t>, 3> partition_by_category(const Dataset& dataset);

}  // namespace inkline
