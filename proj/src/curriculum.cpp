#include "inkline/curriculum.hpp"

#include <string>

#include "inkline/error.hpp"

namespace inkline {

const CurriculumCategory& assign_category(int char_count) {
  for (const auto& category : kCurriculumCategories) {
    if (char_count >= category.min_chars && char_count <= category.max_chars) {
      return category;
    }
  }
  fail(ErrorKind::ContractViolation,
       "character count " + std::to_string(char_count) + " outside curriculum range 1-88");
}

const CurriculumCategory& assign_category(const TextLineSample& sample) {
  return assign_category(sample.char_count);
}

int grid_width(int width) { return ((width + 15) / 16) * 16; }

std::array<std::vector<std::size_t>, 3> partition_by_category(const Dataset& dataset) {
  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& category = assign_category(dataset.samples()[i]);
    parts[static_cast<std::size_t>(category.id - 1)].push_back(i);
  }
  return parts;
}

}  // namespace inkline
