#pragma once

// Degree-of-freedom numbering with Dirichlet and hanging-node constraints,
// and finite element fields bound to a mesh.

#include <functional>
#include <memory>

#include "nodes.hpp"

namespace stgls {

enum class NodeKind { free, dirichlet, hanging };

/// Maps every Lagrange node to an affine combination of free unknowns:
///   u(node) = sum_j w_j x[dof_j] + c.
/// Free nodes have the single term (dof, 1); Dirichlet nodes have no terms and
/// c equal to the prescribed value; hanging nodes carry the fully resolved
/// expansion of their masters. A hanging node whose masters are all prescribed
/// ends up with no terms and is reported as Dirichlet.
template <int D>
class DofMap {
public:
  /// `prescribed(n)` returns the Dirichlet value of non-hanging node n, or nothing if n is free.
  DofMap(std::shared_ptr<const NodeLayout<D>> layout, const std::function<std::optional<double>(int)>& prescribed)
      : layout_(std::move(layout)) {
    const std::size_t nn = layout_->size();
    kind_.assign(nn, NodeKind::free);
    free_index_.assign(nn, -1);
    std::vector<double> value(nn, 0.0);
    for (std::size_t n = 0; n < nn; ++n) {
      if (layout_->is_hanging(int(n))) {
        kind_[n] = NodeKind::hanging;
        continue;
      }
      if (auto v = prescribed(int(n))) {
        kind_[n] = NodeKind::dirichlet;
        value[n] = *v;
      } else {
        free_index_[n] = int(free_nodes_.size());
        free_nodes_.push_back(int(n));
      }
    }
    // resolve every node; hanging chains are followed recursively
    std::vector<Expansion> cache(nn);
    std::vector<char> state(nn, 0);
    std::function<const Expansion&(int)> resolve = [&](int n) -> const Expansion& {
      if (state[n] == 2) return cache[n];
      if (state[n] == 1) throw PreconditionError("cyclic hanging-node constraints");
      state[n] = 1;
      Expansion ex;
      switch (kind_[n]) {
        case NodeKind::free: ex.terms.emplace_back(free_index_[n], 1.0); break;
        case NodeKind::dirichlet: ex.constant = value[n]; break;
        case NodeKind::hanging:
          for (auto [m, w] : layout_->hanging_record(n).masters) {
            const Expansion& sub = resolve(m);
            for (auto [dof, wm] : sub.terms) ex.terms.emplace_back(dof, w * wm);
            ex.constant += w * sub.constant;
          }
          merge(ex.terms);
          break;
      }
      cache[n] = std::move(ex);
      state[n] = 2;
      return cache[n];
    };
    ptr_.assign(nn + 1, 0);
    for (std::size_t n = 0; n < nn; ++n) {
      const Expansion& ex = resolve(int(n));
      for (auto [dof, w] : ex.terms) {
        dof_.push_back(dof);
        weight_.push_back(w);
      }
      constant_.push_back(ex.constant);
      ptr_[n + 1] = dof_.size();
      if (kind_[n] == NodeKind::hanging && ex.terms.empty()) kind_[n] = NodeKind::dirichlet;
    }
  }

  const NodeLayout<D>& layout() const { return *layout_; }
  std::shared_ptr<const NodeLayout<D>> layout_ptr() const { return layout_; }

  std::size_t n_nodes() const { return kind_.size(); }
  std::size_t n_free() const { return free_nodes_.size(); }
  std::size_t n_constrained() const { return n_nodes() - n_free(); }

  NodeKind kind(int n) const { return kind_[n]; }
  std::optional<int> free_dof(int n) const {
    if (free_index_[n] < 0) return std::nullopt;
    return free_index_[n];
  }
  int node_of_free(int dof) const { return free_nodes_[dof]; }

  std::span<const int> terms_dofs(int n) const {
    return std::span<const int>(dof_).subspan(ptr_[n], ptr_[n + 1] - ptr_[n]);
  }
  std::span<const double> terms_weights(int n) const {
    return std::span<const double>(weight_).subspan(ptr_[n], ptr_[n + 1] - ptr_[n]);
  }
  double constant(int n) const { return constant_[n]; }

  /// Full nodal coefficient vector from the free unknowns.
  std::vector<double> expand(std::span<const double> x) const {
    if (x.size() != n_free()) throw PreconditionError("free vector has the wrong size");
    std::vector<double> u(n_nodes());
    for (std::size_t n = 0; n < u.size(); ++n) {
      double v = constant_[n];
      for (std::size_t p = ptr_[n]; p < ptr_[n + 1]; ++p) v += weight_[p] * x[std::size_t(dof_[p])];
      u[n] = v;
    }
    return u;
  }

  /// Same as expand, but with every prescribed value replaced by zero.
  std::vector<double> expand_homogeneous(std::span<const double> x) const {
    auto u = expand(x);
    for (std::size_t n = 0; n < u.size(); ++n) u[n] -= constant_[n];
    return u;
  }

private:
  struct Expansion {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;
  };

  static void merge(std::vector<std::pair<int, double>>& t) {
    std::sort(t.begin(), t.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::size_t out = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (out > 0 && t[out - 1].first == t[i].first)
        t[out - 1].second += t[i].second;
      else
        t[out++] = t[i];
    }
    t.resize(out);
  }

  std::shared_ptr<const NodeLayout<D>> layout_;
  std::vector<NodeKind> kind_;
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
  std::vector<std::size_t> ptr_;
  std::vector<int> dof_;
  std::vector<double> weight_;
  std::vector<double> constant_;
};

/// A continuous piecewise Q_k function given by its values at every node.
template <int D>
class FieldFunction {
public:
  FieldFunction(std::shared_ptr<const Mesh<D>> mesh, std::shared_ptr<const NodeLayout<D>> nodes,
                std::vector<double> coeffs)
      : mesh_(std::move(mesh)), nodes_(std::move(nodes)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != nodes_->size()) throw PreconditionError("coefficient vector has the wrong size");
  }

  const Mesh<D>& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh<D>> mesh_ptr() const { return mesh_; }
  const NodeLayout<D>& nodes() const { return *nodes_; }
  std::shared_ptr<const NodeLayout<D>> nodes_ptr() const { return nodes_; }
  int degree() const { return nodes_->degree(); }
  std::span<const double> coefficients() const { return coeffs_; }
  std::span<double> coefficients() { return coeffs_; }

  /// Value at reference point xi of leaf e.
  double value_on(std::size_t e, const Point<D>& xi) const {
    thread_local std::vector<double> phi;
    phi.resize(nodes_->nodes_per_element());
    nodes_->basis().values(xi, phi);
    const auto idx = nodes_->element_nodes(e);
    double v = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) v += phi[i] * coeffs_[idx[i]];
    return v;
  }

  /// Physical gradient at reference point xi of leaf e.
  Point<D> gradient_on(std::size_t e, const Point<D>& xi) const {
    thread_local std::vector<double> g;
    g.resize(std::size_t(nodes_->nodes_per_element()) * D);
    nodes_->basis().gradients(xi, g);
    const auto idx = nodes_->element_nodes(e);
    const auto s = mesh_->size(mesh_->element(e));
    Point<D> out{};
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int a = 0; a < D; ++a) out[a] += g[i * D + a] * coeffs_[idx[i]];
    for (int a = 0; a < D; ++a) out[a] /= s[a];
    return out;
  }

  double evaluate(const Point<D>& p) const {
    auto e = mesh_->locate(p);
    if (!e) throw DomainError("evaluation point lies outside the domain");
    return value_on(*e, mesh_->to_reference(mesh_->element(*e), p));
  }

private:
  std::shared_ptr<const Mesh<D>> mesh_;
  std::shared_ptr<const NodeLayout<D>> nodes_;
  std::vector<double> coeffs_;
};

/// Field with the given free unknowns and the prescribed values of `dofs`.
template <int D>
FieldFunction<D> make_field(std::shared_ptr<const Mesh<D>> mesh, const DofMap<D>& dofs, std::span<const double> x) {
  return FieldFunction<D>(std::move(mesh), dofs.layout_ptr(), dofs.expand(x));
}

/// Nodal interpolant. Hanging nodes take the value of the constraining
/// interpolant rather than the point value so that the result is continuous.
template <int D>
FieldFunction<D> interpolate_nodal(const std::function<double(const Point<D>&)>& fn,
                                   std::shared_ptr<const Mesh<D>> mesh, int degree) {
  auto nodes = std::make_shared<const NodeLayout<D>>(*mesh, degree);
  const std::size_t nn = nodes->size();
  std::vector<double> c(nn, 0.0);
  std::vector<char> done(nn, 0);
  for (std::size_t n = 0; n < nn; ++n)
    if (!nodes->is_hanging(int(n))) {
      c[n] = fn(nodes->position(int(n)));
      done[n] = 1;
    }
  std::function<double(int)> value = [&](int n) -> double {
    if (done[n]) return c[n];
    double v = 0.0;
    for (auto [m, w] : nodes->hanging_record(n).masters) v += w * value(m);
    c[n] = v;
    done[n] = 1;
    return v;
  };
  for (std::size_t n = 0; n < nn; ++n) value(int(n));
  return FieldFunction<D>(std::move(mesh), std::move(nodes), std::move(c));
}

/// L2 norm by Gauss quadrature with k + 2 points per axis.
template <int D>
double l2_norm(const FieldFunction<D>& u) {
  const auto rule = gauss_rule<D>(quadrature_points_for(u.degree()));
  double s = 0.0;
  for (std::size_t e = 0; e < u.mesh().size(); ++e) {
    const double vol = u.mesh().volume(u.mesh().element(e));
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double v = u.value_on(e, rule.points[q]);
      s += rule.weights[q] * vol * v * v;
    }
  }
  return std::sqrt(s);
}

} // namespace stgls
