#include "mtpr/subsets.hpp"

#include "mtpr/error.hpp"

namespace mtpr {

std::uint64_t binomial(int n, int r) {
  if (r < 0 || n < 0 || r > n) return 0;
  if (r > n - r) r = n - r;
  std::uint64_t result = 1;
  for (int i = 1; i <= r; ++i) {
    result = result * static_cast<std::uint64_t>(n - r + i) / static_cast<std::uint64_t>(i);
  }
  return result;
}

std::vector<Subset> all_subsets(int n, int r) {
  if (n < 0 || n > 31 || r < 0 || r > n) {
    throw Error(ErrorCode::kParameter, "all_subsets: ground set must have at most 31 elements");
  }
  std::vector<Subset> out;
  out.reserve(binomial(n, r));
  if (r == 0) {
    out.push_back(0);
    return out;
  }
  // Gosper's hack walks r-subsets in increasing bitmask order.
  Subset s = (Subset{1} << r) - 1;
  const Subset limit = Subset{1} << n;
  while (s < limit) {
    out.push_back(s);
    const Subset c = s & (~s + 1);
    const Subset next = s + c;
    s = (((next ^ s) >> 2) / c) | next;
  }
  return out;
}

std::vector<int> elements(Subset s) {
  std::vector<int> out;
  while (s != 0) {
    out.push_back(std::countr_zero(s));
    s &= s - 1;
  }
  return out;
}

std::string format_subset(Subset s) {
  std::string out = "{";
  bool first = true;
  for (int e : elements(s)) {
    if (!first) out += ',';
    out += std::to_string(e + 1);
    first = false;
  }
  out += '}';
  return out;
}

}  // namespace mtpr
