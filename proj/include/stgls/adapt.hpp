#pragma once

// Solve, estimate, mark, refine, balance, repeat.

#include <algorithm>
#include <limits>
#include <numeric>

#include "estimate.hpp"

namespace stgls {

enum class Marking { threshold, fixed_fraction };

inline const char* to_string(Marking m) { return m == Marking::threshold ? "threshold" : "fixed_fraction"; }

struct AdaptConfig {
  double eta_tol = 1e-3;  ///< per-element threshold on eta_K
  int max_rounds = 10;    ///< refinement passes
  int max_level = 12;
  Marking marking = Marking::threshold;
  double theta = 0.5;  ///< bulk fraction of sum eta_K^2 for fixed_fraction marking

  void validate() const {
    if (!(eta_tol > 0.0)) throw PreconditionError("eta_tol must be positive");
    if (max_rounds < 0) throw PreconditionError("max_rounds must be non-negative");
    if (max_level < 0) throw PreconditionError("max_level must be non-negative");
    if (!(theta > 0.0 && theta <= 1.0)) throw PreconditionError("theta must lie in (0, 1]");
  }
};

enum class StopReason { tolerance_met, max_rounds, max_level };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::tolerance_met: return "tolerance_met";
    case StopReason::max_rounds: return "max_rounds";
    case StopReason::max_level: return "max_level";
  }
  return "?";
}

struct AdaptRound {
  int round = 0;
  std::size_t elements = 0;
  std::size_t dof = 0;  ///< free unknowns
  double eta = 0.0;
  double max_eta_k = 0.0;
  std::optional<double> err_l2;
  std::size_t refined = 0;  ///< elements refined after this round's solve
  int max_level = 0;
  double h_ratio = 1.0;  ///< h_max / h_min
  bool balanced = true;
  double hanging_weight_defect = 0.0;  ///< max |sum of master weights - 1| over hanging nodes
};

struct AdaptTrace {
  std::vector<AdaptRound> rounds;
  StopReason reason = StopReason::max_rounds;
};

/// Raised when a solve fails mid-loop; carries the rounds completed so far.
class AdaptAborted : public SolverError {
public:
  AdaptAborted(const std::string& what, AdaptTrace partial) : SolverError(what), trace(std::move(partial)) {}
  AdaptTrace trace;
};

template <int D>
struct AdaptResult {
  FieldFunction<D> field;
  AdaptTrace trace;
};

/// Leaf indices selected for refinement, in increasing order.
inline std::vector<std::size_t> mark_elements(std::span<const double> eta_k, const AdaptConfig& cfg) {
  std::vector<std::size_t> out;
  if (cfg.marking == Marking::threshold) {
    for (std::size_t e = 0; e < eta_k.size(); ++e)
      if (eta_k[e] > cfg.eta_tol) out.push_back(e);
    return out;
  }
  // smallest set, largest first, carrying theta of the total squared indicator
  std::vector<std::size_t> order(eta_k.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eta_k[a] > eta_k[b]; });
  double total = 0.0;
  for (double x : eta_k) total += x * x;
  double acc = 0.0;
  for (std::size_t e : order) {
    if (acc >= cfg.theta * total || !(eta_k[e] > 0.0)) break;
    out.push_back(e);
    acc += eta_k[e] * eta_k[e];
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <int D>
double hanging_weight_defect(const NodeLayout<D>& nodes) {
  double worst = 0.0;
  for (const auto& h : nodes.hanging()) {
    double s = 0.0;
    for (auto [m, w] : h.masters) s += w;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

template <int D>
AdaptResult<D> adapt_loop(const ProblemSpec<D>& problem, int degree, const Mesh<D>& initial, const AdaptConfig& cfg,
                          const GlsParams& gls = {}, const SolveConfig& solver = {}) {
  cfg.validate();
  auto mesh = std::make_shared<const Mesh<D>>(balance_2to1(initial));
  AdaptTrace trace;
  for (int round = 0;; ++round) {
    std::optional<Solution<D>> sol;
    try {
      sol.emplace(solve_problem(mesh, problem, degree, gls, solver));
    } catch (const SolverError& e) {
      throw AdaptAborted("adaptive round " + std::to_string(round) + ": " + e.what(), std::move(trace));
    }
    const auto est = estimate(sol->field, problem, gls);
    AdaptRound rec;
    rec.round = round;
    rec.elements = mesh->size();
    rec.dof = sol->n_free;
    rec.eta = est.eta;
    rec.max_eta_k = est.eta_k.empty() ? 0.0 : *std::max_element(est.eta_k.begin(), est.eta_k.end());
    if (problem.exact) rec.err_l2 = error_norms(sol->field, problem, gls).err_l2;
    rec.max_level = mesh->max_level();
    rec.h_ratio = mesh->h_max() / mesh->h_min();
    rec.balanced = mesh->is_balanced();
    rec.hanging_weight_defect = hanging_weight_defect(sol->field.nodes());

    auto finish = [&](StopReason why) {
      trace.rounds.push_back(rec);
      trace.reason = why;
      return AdaptResult<D>{std::move(sol->field), std::move(trace)};
    };
    if (rec.max_eta_k <= cfg.eta_tol) return finish(StopReason::tolerance_met);
    if (round >= cfg.max_rounds) return finish(StopReason::max_rounds);
    std::vector<ElementId> ids;
    for (std::size_t e : mark_elements(est.eta_k, cfg))
      if (mesh->element(e).level < cfg.max_level) ids.push_back(mesh->element(e).id);
    if (ids.empty()) return finish(StopReason::max_level);
    rec.refined = ids.size();
    trace.rounds.push_back(rec);
    mesh = std::make_shared<const Mesh<D>>(balance_2to1(refine(*mesh, ids)));
  }
}

} // namespace stgls
