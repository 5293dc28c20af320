#pragma once

#include <span>
#include <vector>

#include "fglr/graph.hpp"

namespace fglr {

struct CgOptions {
  double tolerance = 1e-8;  // on ||r|| / ||b||
  int max_iterations = 2000;
};

/// min_x ||b - x||^2 + mu x^T L x, solved through (I + mu L) x = b.
struct GlrProblem {
  std::span<const double> b;
  const PatchGraph* laplacian = nullptr;
  double mu = 1.0;
  CgOptions cg{};
};

struct SolveResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradient without preconditioning. `warm_start`, when non-empty,
/// is the initial iterate. On hitting the iteration cap the iterate with the
/// smallest residual is returned with converged = false. mu = 0 is accepted
/// and yields x = b.
SolveResult solve(const GlrProblem& problem, std::span<const double> warm_start = {});

/// ||b - x||^2 + mu x^T L x
double objective(std::span<const double> x, std::span<const double> b, const PatchGraph& laplacian,
                 double mu);

}  // namespace fglr
