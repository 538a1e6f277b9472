#include "casimir/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "casimir/errors.hpp"

namespace casimir::quadrature {
namespace {

Rule build_gauss_legendre(int n) {
  Rule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    r.nodes[lo] = -x;
    r.nodes[hi] = x;
    r.weights[lo] = w;
    r.weights[hi] = w;
  }
  if (n % 2 == 1) r.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return r;
}

}  // namespace

const Rule& gauss_legendre(int n) {
  if (n < 1 || n > 4096) throw DomainError("Gauss-Legendre order out of range");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<Rule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Rule>(build_gauss_legendre(n));
  return *slot;
}

Rule composite_gauss_legendre(double lo, double hi, int panels, int order) {
  if (panels < 1) throw DomainError("composite rule needs at least one panel");
  const Rule& base = gauss_legendre(order);
  Rule r;
  r.nodes.reserve(static_cast<std::size_t>(panels) * base.size());
  r.weights.reserve(r.nodes.capacity());
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    const double half = 0.5 * width;
    for (std::size_t i = 0; i < base.size(); ++i) {
      r.nodes.push_back(a + half * (base.nodes[i] + 1.0));
      r.weights.push_back(half * base.weights[i]);
    }
  }
  return r;
}

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::fabs(sum_) >= std::fabs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

}  // namespace casimir::quadrature
