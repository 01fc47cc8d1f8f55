#pragma once

// Global Lagrange node enumeration for a mesh and polynomial degree, with
// hanging-node detection.
//
// Nodes live on an integer lattice of k * 2^L points per axis, where L is the
// finest level in the mesh. A node is hanging when some leaf containing it does
// not carry it among its own nodes; its value is then the trace of that leaf's
// interpolant, i.e. the coarse shape functions evaluated at the node.

#include <algorithm>
#include <unordered_map>
#include <utility>

#include "basis.hpp"
#include "mesh.hpp"

namespace stgls {

struct HangingNode {
  int node = -1;
  std::vector<std::pair<int, double>> masters;  ///< (node id, weight); weights sum to 1
};

template <int D>
class NodeLayout {
public:
  NodeLayout(const Mesh<D>& mesh, int degree) : k_(degree), basis_(degree) {
    check_degree(degree);
    levels_ = mesh.max_level();
    resolution_ = std::int64_t(k_) << levels_;
    if (levels_ > 19 || resolution_ >= (std::int64_t{1} << 21))
      throw CapacityError("node lattice exceeds 21 bits per axis");
    const int npe = basis_.size();
    element_nodes_.resize(mesh.size() * npe);
    std::unordered_map<std::uint64_t, int> index;
    index.reserve(mesh.size() * 2);
    for (std::size_t e = 0; e < mesh.size(); ++e) {
      const auto& el = mesh.element(e);
      const std::int64_t spacing = std::int64_t{1} << (levels_ - el.level);
      for (int i = 0; i < npe; ++i) {
        const auto m = basis_.multi_index(i);
        IntPoint<D> lat{};
        for (int a = 0; a < D; ++a) lat[a] = (el.coords[a] * k_ + m[a]) * spacing;
        const auto key = pack(lat);
        auto [it, inserted] = index.try_emplace(key, int(lattice_.size()));
        if (inserted) lattice_.push_back(lat);
        element_nodes_[e * npe + i] = it->second;
      }
    }
    const auto& dom = mesh.domain();
    positions_.resize(lattice_.size());
    for (std::size_t n = 0; n < lattice_.size(); ++n)
      for (int a = 0; a < D; ++a)
        positions_[n][a] = dom.extent[a].lower + dom.extent[a].length() * double(lattice_[n][a]) / double(resolution_);
    index_ = std::move(index);
    detect_hanging(mesh);
  }

  int degree() const { return k_; }
  const TensorBasis<D>& basis() const { return basis_; }
  std::size_t size() const { return lattice_.size(); }
  int nodes_per_element() const { return basis_.size(); }
  std::int64_t resolution() const { return resolution_; }

  std::span<const int> element_nodes(std::size_t e) const {
    return std::span<const int>(element_nodes_).subspan(e * basis_.size(), basis_.size());
  }
  const Point<D>& position(int n) const { return positions_[n]; }
  const IntPoint<D>& lattice(int n) const { return lattice_[n]; }

  std::optional<int> find(const IntPoint<D>& lat) const {
    auto it = index_.find(pack(lat));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const HangingNode> hanging() const { return hanging_; }
  bool is_hanging(int n) const { return hanging_slot_[n] >= 0; }
  const HangingNode& hanging_record(int n) const { return hanging_[hanging_slot_[n]]; }

  /// True if the node lies on the lower or upper face of the box along `axis`.
  bool on_box_face(int n, int axis, bool upper) const {
    return lattice_[n][axis] == (upper ? resolution_ : 0);
  }

private:
  static std::uint64_t pack(const IntPoint<D>& lat) {
    std::uint64_t key = 0;
    for (int a = 0; a < D; ++a) key |= std::uint64_t(lat[a]) << (21 * a);
    return key;
  }

  void detect_hanging(const Mesh<D>& mesh) {
    hanging_slot_.assign(lattice_.size(), -1);
    const int npe = basis_.size();
    std::vector<double> shape(npe);
    for (std::size_t n = 0; n < lattice_.size(); ++n) {
      const auto& lat = lattice_[n];
      std::optional<std::size_t> coarsest;
      // every finest-level cell around the node, resolved to its leaf
      for (unsigned orth = 0; orth < (1u << D); ++orth) {
        IntPoint<D> cell{};
        bool valid = true;
        for (int a = 0; a < D; ++a) {
          const bool lower = ((orth >> a) & 1u) == 0;
          std::int64_t c = lower ? (lat[a] - 1) : lat[a];
          if (c < 0 || c >= resolution_) {
            valid = false;
            break;
          }
          cell[a] = c / k_;
        }
        if (!valid) continue;
        auto leaf = mesh.leaf_containing_cell(levels_, cell);
        if (!leaf) continue;
        const auto& el = mesh.element(*leaf);
        if (carries_node(el, lat)) continue;
        if (!coarsest || el.level < mesh.element(*coarsest).level ||
            (el.level == mesh.element(*coarsest).level && el.id < mesh.element(*coarsest).id))
          coarsest = *leaf;
      }
      if (!coarsest) continue;
      const auto& el = mesh.element(*coarsest);
      const std::int64_t span = (std::int64_t{1} << (levels_ - el.level)) * k_;
      Point<D> xi{};
      for (int a = 0; a < D; ++a)
        xi[a] = double(lat[a] - el.coords[a] * span) / double(span);
      basis_.values(xi, shape);
      HangingNode h;
      h.node = int(n);
      const auto nodes = element_nodes(*coarsest);
      for (int i = 0; i < npe; ++i)
        if (std::abs(shape[i]) > 1e-13) h.masters.emplace_back(nodes[i], shape[i]);
      hanging_slot_[n] = int(hanging_.size());
      hanging_.push_back(std::move(h));
    }
  }

  bool carries_node(const Element<D>& el, const IntPoint<D>& lat) const {
    const std::int64_t spacing = std::int64_t{1} << (levels_ - el.level);
    for (int a = 0; a < D; ++a)
      if ((lat[a] - el.coords[a] * k_ * spacing) % spacing != 0) return false;
    return true;
  }

  int k_;
  TensorBasis<D> basis_;
  int levels_ = 0;
  std::int64_t resolution_ = 0;
  std::vector<int> element_nodes_;
  std::vector<IntPoint<D>> lattice_;
  std::vector<Point<D>> positions_;
  std::unordered_map<std::uint64_t, int> index_;
  std::vector<HangingNode> hanging_;
  std::vector<int> hanging_slot_;
};

/// Hanging nodes of the degree-k space on `mesh`, each with its direct masters.
template <int D>
std::vector<HangingNode> find_hanging_nodes(const Mesh<D>& mesh, int degree) {
  if (!mesh.is_balanced()) throw PreconditionError("find_hanging_nodes requires a 2:1 balanced mesh");
  NodeLayout<D> layout(mesh, degree);
  return {layout.hanging().begin(), layout.hanging().end()};
}

} // namespace stgls
