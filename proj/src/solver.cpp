#include "fglr/solver.hpp"

#include <cmath>

#include "fglr/error.hpp"

namespace fglr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

// out = (I + mu L) v
void apply_system(const PatchGraph& l, double mu, std::span<const double> v,
                  std::span<double> out) {
  l.apply(v, out);
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] + mu * out[k];
}

}  // namespace

SolveResult solve(const GlrProblem& p, std::span<const double> warm_start) {
  if (!p.laplacian) throw ConfigError("GLR problem without a Laplacian");
  const PatchGraph& l = *p.laplacian;
  const std::size_t n = p.b.size();
  if (n != static_cast<std::size_t>(l.nodes()))
    throw DimensionError("GLR problem: b and L sizes differ");
  if (!warm_start.empty() && warm_start.size() != n)
    throw DimensionError("GLR problem: warm start has the wrong size");
  if (!(p.mu >= 0.0)) throw ConfigError("mu must be non-negative");

  SolveResult res;
  res.x.assign(p.b.begin(), p.b.end());
  if (p.mu == 0.0 || n == 0) {
    res.converged = true;
    return res;
  }
  const double b_norm = std::sqrt(dot(p.b, p.b));
  if (b_norm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    res.converged = true;
    return res;
  }
  if (!warm_start.empty()) res.x.assign(warm_start.begin(), warm_start.end());

  std::vector<double> r(n);
  std::vector<double> d(n);
  std::vector<double> ad(n);
  apply_system(l, p.mu, res.x, ad);
  for (std::size_t k = 0; k < n; ++k) r[k] = p.b[k] - ad[k];
  double rr = dot(r, r);
  const double target = p.cg.tolerance * b_norm;

  std::vector<double> best = res.x;
  double best_rr = rr;
  d = r;
  int it = 0;
  while (std::sqrt(rr) > target && it < p.cg.max_iterations) {
    apply_system(l, p.mu, d, ad);
    const double dad = dot(d, ad);
    if (!(dad > 0.0)) break;
    const double alpha = rr / dad;
    for (std::size_t k = 0; k < n; ++k) {
      res.x[k] += alpha * d[k];
      r[k] -= alpha * ad[k];
    }
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t k = 0; k < n; ++k) d[k] = r[k] + beta * d[k];
    ++it;
    if (rr < best_rr) {
      best_rr = rr;
      best = res.x;
    }
  }
  res.iterations = it;
  res.converged = std::sqrt(rr) <= target;
  if (!res.converged) {
    res.x = std::move(best);
    rr = best_rr;
  }
  res.relative_residual = std::sqrt(rr) / b_norm;
  return res;
}

double objective(std::span<const double> x, std::span<const double> b, const PatchGraph& laplacian,
                 double mu) {
  if (x.size() != b.size()) throw DimensionError("objective: x and b sizes differ");
  double fidelity = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = b[k] - x[k];
    fidelity += d * d;
  }
  return fidelity + mu * laplacian.quadratic_form(x);
}

}  // namespace fglr
