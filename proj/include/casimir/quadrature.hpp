#pragma once

#include <vector>

namespace casimir::quadrature {

/// Nodes and weights of a quadrature rule; weights are positive.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [-1, 1]. Cached and immutable once built.
const Rule& gauss_legendre(int n);

/// Composite Gauss-Legendre rule: [lo, hi] split into `panels` equal panels, `order` nodes each.
Rule composite_gauss_legendre(double lo, double hi, int panels, int order);

/// Kahan-Babuska (Neumaier) compensated accumulator.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace casimir::quadrature
