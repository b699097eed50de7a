#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "lssat/autodiff.hpp"

namespace lssat {

// Builds a scalar loss on `graph` from the leaf holding the probed tensor.
using ScalarFunction = std::function<Var(Graph& graph, Var probe)>;

// Max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-12).
// A non-finite coordinate makes the result +infinity.
double finite_difference_check(const ScalarFunction& f, const Tensor& p, double step);

// Same, restricted to the listed flat coordinates of p.
double finite_difference_check(const ScalarFunction& f, const Tensor& p, double step,
                               std::span<const std::size_t> coords);

}  // namespace lssat
