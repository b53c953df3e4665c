#include "darkscan/distinct_counter.hpp"

#include <bit>
#include <cmath>

#include "darkscan/ipv4.hpp"

namespace darkscan {

void DistinctCounter::insert(uint32_t value) {
  if (!registers_.empty()) {
    insert_hll(value);
    return;
  }
  values_.insert(value);
  if (!exact_ && values_.size() > kPromoteAt)
    promote();
}

void DistinctCounter::promote() {
  registers_.assign(kRegisters, 0);
  for (uint32_t v : values_)
    insert_hll(v);
  values_.clear();
  values_.rehash(0);
}

void DistinctCounter::insert_hll(uint32_t value) {
  uint64_t h = detail::mix64(uint64_t{value} + 0x9e3779b97f4a7c15ULL);
  size_t index = h >> (64 - kPrecision);
  uint64_t rest = (h << kPrecision) | (uint64_t{1} << (kPrecision - 1));
  auto rank = static_cast<uint8_t>(std::countl_zero(rest) + 1);
  if (rank > registers_[index])
    registers_[index] = rank;
}

uint64_t DistinctCounter::count() const {
  if (registers_.empty())
    return values_.size();
  const double m = static_cast<double>(kRegisters);
  double sum = 0.0;
  size_t zeros = 0;
  for (uint8_t r : registers_) {
    sum += std::ldexp(1.0, -static_cast<int>(r));
    if (r == 0)
      ++zeros;
  }
  const double alpha = 0.7213 / (1.0 + 1.079 / m);
  double estimate = alpha * m * m / sum;
  if (estimate <= 2.5 * m && zeros > 0)
    estimate = m * std::log(m / static_cast<double>(zeros));
  return static_cast<uint64_t>(std::llround(estimate));
}

} // namespace darkscan
