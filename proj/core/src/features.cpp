#include "harfuse/features.hpp"

#include <algorithm>
#include <string>

#include "harfuse/errors.hpp"

namespace harfuse {

void FeatureMatrix::validate() const {
  if (sample_ids.size() != values.rows()) {
    throw Error(ErrorCode::contract, "feature matrix has " + std::to_string(values.rows()) +
                                         " rows but " + std::to_string(sample_ids.size()) + " ids");
  }
  std::vector<std::uint64_t> sorted = sample_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorCode::contract, "feature matrix has duplicate sample ids");
}

void require_aligned(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.sample_ids != b.sample_ids) {
    throw Error(ErrorCode::alignment, std::string("feature matrices for ") +
                                          std::string(to_string(a.domain)) + " and " +
                                          std::string(to_string(b.domain)) +
                                          " are not aligned on the same samples");
  }
}

}  // namespace harfuse
