#pragma once

#include <functional>
#include <span>
#include <vector>

namespace lifesat::optimize {

// f(x, grad) returns the objective and writes its gradient into `grad`.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct Options {
  double step_tolerance = 1e-8;       // max |dx| for convergence
  double objective_tolerance = 1e-10; // |df| for convergence
  double gradient_tolerance = 1e-9;   // projected gradient, inf-norm
  int max_iterations = 5000;
};

struct Result {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double projected_gradient = 0.0;  // inf-norm over free variables, set by polish
};

// Box-constrained quasi-Newton minimizer: BFGS on the free variables with a
// projected Armijo backtracking line search. The inverse-Hessian estimate is
// reset whenever the active set changes.
Result minimize(const Objective& f, std::vector<double> x0, const Box& box,
                const Options& options = {});

// Projected Newton refinement from a point near a minimum. The Hessian comes
// from forward differences of the analytic gradient; variables held at a
// bound are dropped from the step. Stops once the free gradient is below
// `gradient_tolerance` or no decrease is found.
Result polish(const Objective& f, std::vector<double> x, const Box& box,
              double gradient_tolerance = 1e-10, int max_steps = 100);

// Central-difference gradient, used to check analytic gradients.
std::vector<double> numerical_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double step = 1e-5);

}  // namespace lifesat::optimize
