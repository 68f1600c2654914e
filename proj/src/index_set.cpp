#include "redcert/index_set.hpp"

#include <algorithm>
#include <iterator>
#include <limits>
#include <string>

#include "redcert/error.hpp"

namespace redcert {

IndexSet IndexSet::from_unsorted(std::vector<std::uint32_t> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return IndexSet(std::move(indices));
}

IndexSet IndexSet::from_sorted(std::vector<std::uint32_t> indices) {
  for (std::size_t i = 1; i < indices.size(); ++i) {
    if (indices[i - 1] >= indices[i]) {
      throw FormatError("index set is not strictly increasing at position " +
                        std::to_string(i));
    }
  }
  return IndexSet(std::move(indices));
}

IndexSet IndexSet::range(std::uint32_t begin, std::uint32_t end) {
  std::vector<std::uint32_t> out;
  if (end > begin) {
    out.reserve(end - begin);
    for (std::uint32_t i = begin; i < end; ++i) out.push_back(i);
  }
  return IndexSet(std::move(out));
}

IndexSet IndexSet::from_runs(std::span<const Run> runs) {
  constexpr std::uint64_t kLimit = std::uint64_t{std::numeric_limits<std::uint32_t>::max()} + 1;
  std::uint64_t next_free = 0;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Run& r = runs[i];
    if (r.length == 0) throw FormatError("zero-length run at position " + std::to_string(i));
    const std::uint64_t stop = std::uint64_t{r.start} + r.length;
    if (stop > kLimit) throw FormatError("run-length decode overflow at position " + std::to_string(i));
    if (i > 0 && r.start < next_free) {
      throw FormatError("runs unsorted or overlapping at position " + std::to_string(i));
    }
    next_free = stop;
    total += r.length;
  }
  std::vector<std::uint32_t> out;
  out.reserve(total);
  for (const Run& r : runs) {
    for (std::uint64_t i = r.start; i < std::uint64_t{r.start} + r.length; ++i) {
      out.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return IndexSet(std::move(out));
}

bool IndexSet::contains(std::uint32_t index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

std::uint64_t IndexSet::bound() const {
  return indices_.empty() ? 0 : std::uint64_t{indices_.back()} + 1;
}

std::vector<Run> IndexSet::runs() const {
  std::vector<Run> out;
  for (std::uint32_t idx : indices_) {
    if (!out.empty() && std::uint64_t{out.back().start} + out.back().length == idx) {
      ++out.back().length;
    } else {
      out.push_back({idx, 1});
    }
  }
  return out;
}

IndexSet IndexSet::unite(const IndexSet& other) const {
  std::vector<std::uint32_t> out;
  out.reserve(indices_.size() + other.indices_.size());
  std::set_union(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
                 std::back_inserter(out));
  return IndexSet(std::move(out));
}

IndexSet IndexSet::intersect(const IndexSet& other) const {
  std::vector<std::uint32_t> out;
  std::set_intersection(indices_.begin(), indices_.end(), other.indices_.begin(),
                        other.indices_.end(), std::back_inserter(out));
  return IndexSet(std::move(out));
}

IndexSet IndexSet::subtract(const IndexSet& other) const {
  std::vector<std::uint32_t> out;
  std::set_difference(indices_.begin(), indices_.end(), other.indices_.begin(),
                      other.indices_.end(), std::back_inserter(out));
  return IndexSet(std::move(out));
}

bool IndexSet::disjoint_from(const IndexSet& other) const {
  auto a = indices_.begin();
  auto b = other.indices_.begin();
  while (a != indices_.end() && b != other.indices_.end()) {
    if (*a == *b) return false;
    if (*a < *b) {
      ++a;
    } else {
      ++b;
    }
  }
  return true;
}

}  // namespace redcert
