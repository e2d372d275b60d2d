#include "lmpanel/pava.hpp"

#include <vector>

namespace lmpanel {

namespace {

struct Block {
  double weighted_sum;
  double weight;
  double plain_sum;
  int count;
  double value;

  void merge(const Block& other) {
    weighted_sum += other.weighted_sum;
    weight += other.weight;
    plain_sum += other.plain_sum;
    count += other.count;
    value = weight > 0.0 ? weighted_sum / weight : plain_sum / count;
  }
};

} // namespace

Vector weighted_isotonic_fit(const Vector& values, const Vector& weights) {
  const int n = static_cast<int>(values.size());
  std::vector<Block> blocks;
  blocks.reserve(n);
  for (int i = 0; i < n; ++i) {
    Block b{weights[i] * values[i], weights[i], values[i], 1, values[i]};
    if (b.weight > 0.0) b.value = b.weighted_sum / b.weight;
    blocks.push_back(b);
    while (blocks.size() > 1 &&
           blocks[blocks.size() - 2].value > blocks.back().value) {
      blocks[blocks.size() - 2].merge(blocks.back());
      blocks.pop_back();
    }
  }
  Vector out(n);
  int pos = 0;
  for (const auto& b : blocks)
    for (int i = 0; i < b.count; ++i) out[pos++] = b.value;
  return out;
}

} // namespace lmpanel
