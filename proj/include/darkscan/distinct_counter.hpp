#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

namespace darkscan {

/// Counts distinct 32-bit values. In exact mode the count is exact. In
/// estimate mode values are kept exactly until `kPromoteAt` and then folded
/// into a HyperLogLog with 2^14 registers (standard error 1.04/128 ~ 0.81%).
class DistinctCounter {
public:
  static constexpr unsigned kPrecision = 14;
  static constexpr size_t kRegisters = size_t{1} << kPrecision;
  static constexpr size_t kPromoteAt = 4096;

  explicit DistinctCounter(bool exact = true) : exact_(exact) {}

  void insert(uint32_t value);
  uint64_t count() const;

  bool exact_mode() const { return exact_; }
  bool estimating() const { return !registers_.empty(); }
  static double standard_error() { return 1.04 / 128.0; }

private:
  void promote();
  void insert_hll(uint32_t value);

  bool exact_;
  std::unordered_set<uint32_t> values_;
  std::vector<uint8_t> registers_;
};

} // namespace darkscan
