#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace redcert {

// A run of consecutive indices [start, start + length).
struct Run {
  std::uint32_t start = 0;
  std::uint32_t length = 0;
  friend bool operator==(const Run&, const Run&) = default;
};

// Sorted, duplicate-free set of input-dimension indices.
class IndexSet {
 public:
  IndexSet() = default;

  // Accepts indices in any order; duplicates are dropped.
  static IndexSet from_unsorted(std::vector<std::uint32_t> indices);
  // Requires strictly increasing input, throws FormatError otherwise.
  static IndexSet from_sorted(std::vector<std::uint32_t> indices);
  static IndexSet range(std::uint32_t begin, std::uint32_t end);
  // Runs must be sorted by start and non-overlapping; zero-length runs and
  // runs past 2^32 are rejected with FormatError.
  static IndexSet from_runs(std::span<const Run> runs);

  [[nodiscard]] std::span<const std::uint32_t> indices() const { return indices_; }
  [[nodiscard]] std::size_t size() const { return indices_.size(); }
  [[nodiscard]] bool empty() const { return indices_.empty(); }
  [[nodiscard]] bool contains(std::uint32_t index) const;
  // Largest index + 1, or 0 for the empty set.
  [[nodiscard]] std::uint64_t bound() const;

  // Canonical run-length form: maximal runs sorted by start.
  [[nodiscard]] std::vector<Run> runs() const;

  [[nodiscard]] IndexSet unite(const IndexSet& other) const;
  [[nodiscard]] IndexSet intersect(const IndexSet& other) const;
  [[nodiscard]] IndexSet subtract(const IndexSet& other) const;
  [[nodiscard]] bool disjoint_from(const IndexSet& other) const;

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  explicit IndexSet(std::vector<std::uint32_t> sorted) : indices_(std::move(sorted)) {}
  std::vector<std::uint32_t> indices_;
};

}  // namespace redcert
