// Prints the t-frontier of a tiny hand-made order book: which cells feed x_t
// and which become targets y_t.
#include <iostream>

#include "btof/diagonal.hpp"

int main() {
  using namespace btof;
  // One item, periods 0..5, H = 3. Gross volumes shrink with the delivery date.
  std::vector<OrderRecord> records;
  for (std::int64_t t = 0; t < 6; ++t)
    for (int h = 0; h < 3; ++h) records.push_back({"A", t, h, 10 * (t + 1) - 3 * h});
  const DemandCube cube = build_cube(records, 3, Semantics::gross);

  const FrontierLayout layout = FrontierLayout::make(3, 1);
  const auto frontiers = build_frontiers(cube, 0, layout);
  std::cout << frontiers.size() << " frontiers\n";
  const FrontierSample& s = frontiers.front();
  std::cout << "frontier t = " << s.t << "\n  features:\n";
  for (std::size_t k = 0; k < s.x.size(); ++k)
    std::cout << "    " << layout.x_label(k) << " = q[" << s.t + layout.x[k].offset << "][" << layout.x[k].delivery_date
              << "] = " << s.x[k] << '\n';
  std::cout << "  targets:\n";
  for (std::size_t k = 0; k < s.y.size(); ++k)
    std::cout << "    " << layout.y_label(k) << " = q[" << s.t + layout.y[k].offset << "][" << layout.y[k].delivery_date
              << "] = " << s.y[k] << '\n';
}
