// Prints the coherence of random 3x3 banks at a few channel/filter counts.

#include <cstdint>
#include <iostream>

#include <convsense/convsense.hpp>

int main() {
  using namespace convsense;
  struct Shape {
    int filters, channels;
  };
  const Shape shapes[] = {{64, 3}, {128, 64}, {256, 128}};
  for (const auto& shape : shapes) {
    const auto bank = normalize_rows(random_filter_bank(shape.filters, shape.channels, 3, 2, 1));
    const StructuredOperator op(bank, InputGeometry{8, 1});
    std::cout << shape.filters << " filters x " << shape.channels
              << " channels: mu = " << coherence(op) << "\n";
  }
  return 0;
}
