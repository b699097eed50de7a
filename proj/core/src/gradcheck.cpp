#include "lssat/gradcheck.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lssat/error.hpp"

namespace lssat {

namespace {

double evaluate(const ScalarFunction& f, const Tensor& p) {
  Graph g;
  Var probe = g.constant(p);
  return f(g, probe).value().item();
}

}  // namespace

double finite_difference_check(const ScalarFunction& f, const Tensor& p, double step,
                               std::span<const std::size_t> coords) {
  if (!(step > 0.0)) throw RangeError("finite_difference_check: step must be positive");
  Graph g;
  Var probe = g.leaf(p.with_requires_grad(true));
  Var loss = f(g, probe);
  auto grads = backward(g, loss);
  std::vector<double> analytic(p.size(), 0.0);
  if (auto it = grads.find(probe.id); it != grads.end()) analytic = it->second.to_vector();

  double worst = 0.0;
  for (std::size_t c : coords) {
    if (c >= p.size()) throw RangeError("finite_difference_check: coordinate out of range");
    std::vector<double> plus = p.to_vector(), minus = p.to_vector();
    plus[c] += step;
    minus[c] -= step;
    const double fp = evaluate(f, Tensor(p.shape(), std::move(plus)));
    const double fm = evaluate(f, Tensor(p.shape(), std::move(minus)));
    const double central = (fp - fm) / (2.0 * step);
    const double a = analytic[c];
    if (!std::isfinite(central) || !std::isfinite(a)) return std::numeric_limits<double>::infinity();
    const double rel = std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

double finite_difference_check(const ScalarFunction& f, const Tensor& p, double step) {
  std::vector<std::size_t> all(p.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return finite_difference_check(f, p, step, all);
}

}  // namespace lssat
