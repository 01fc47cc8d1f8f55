#pragma once

// Hierarchical hypercube tessellation of an axis-aligned box.
//
// Elements are identified by level-order Morton location codes: a leading 1
// bit followed by D*level interleaved coordinate bits. Sorting leaves by code
// therefore orders them by level first and Morton order second, and the parent
// of a code is obtained by dropping its last D bits.

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace stgls {

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
  double length() const { return upper - lower; }
};

/// Axis-aligned box. For space-time meshes the last axis is time, so the box
/// is U x (0, T] with d = D - 1 spatial dimensions.
template <int D>
struct SpaceTimeDomain {
  static_assert(D >= 1 && D <= 3, "only 1, 2 and 3 total dimensions are supported");
  static constexpr int dim_space = D - 1;

  std::array<Interval, D> extent{};

  double final_time() const { return extent[D - 1].upper; }

  void validate() const {
    for (int a = 0; a < D; ++a)
      if (!(extent[a].lower < extent[a].upper))
        throw DomainError("degenerate extent on axis " + std::to_string(a));
  }

  bool contains(const Point<D>& p, double rel_tol = 1e-12) const {
    for (int a = 0; a < D; ++a) {
      const double tol = rel_tol * extent[a].length();
      if (p[a] < extent[a].lower - tol || p[a] > extent[a].upper + tol) return false;
    }
    return true;
  }
};

using ElementId = std::uint64_t;

template <int D>
struct Element {
  ElementId id = 1;
  int level = 0;
  IntPoint<D> coords{};  ///< cell index at `level` along each axis
};

enum class BoundaryTag { interior, spatial, initial, final };

inline const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::interior: return "interior";
    case BoundaryTag::spatial: return "spatial";
    case BoundaryTag::initial: return "initial";
    case BoundaryTag::final: return "final";
  }
  return "?";
}

/// A leaf face. Conforming interior faces have one neighbor; a hanging face is
/// owned by the coarse element and lists the 2^(D-1) fine elements behind it.
struct Face {
  ElementId owner = 0;
  std::vector<ElementId> neighbors;
  std::size_t owner_index = 0;
  std::vector<std::size_t> neighbor_indices;
  int axis = 0;
  int orientation = 1;  ///< sign of the owner's outward normal along `axis`
  BoundaryTag tag = BoundaryTag::interior;
  bool hanging = false;

  bool is_boundary() const { return neighbors.empty(); }
};

namespace morton {

template <int D>
constexpr int max_level() {
  return std::min(63 / D, 30);
}

template <int D>
ElementId encode(int level, const IntPoint<D>& c) {
  ElementId code = ElementId{1} << (D * level);
  for (int b = 0; b < level; ++b)
    for (int a = 0; a < D; ++a)
      code |= ElementId((c[a] >> b) & 1) << (b * D + a);
  return code;
}

template <int D>
int level_of(ElementId code) {
  return (std::bit_width(code) - 1) / D;
}

template <int D>
IntPoint<D> coords_of(ElementId code) {
  const int level = level_of<D>(code);
  IntPoint<D> c{};
  for (int b = 0; b < level; ++b)
    for (int a = 0; a < D; ++a)
      c[a] |= std::int64_t((code >> (b * D + a)) & 1) << b;
  return c;
}

template <int D>
ElementId parent(ElementId code) {
  return code >> D;
}

/// Child `which` in [0, 2^D); bit a of `which` selects the upper half along axis a.
template <int D>
ElementId child(ElementId code, unsigned which) {
  return (code << D) | which;
}

} // namespace morton

template <int D>
class Mesh {
public:
  using ElementType = Element<D>;

  Mesh() : Mesh(SpaceTimeDomain<D>{}, std::vector<ElementId>{1}) {}

  /// Builds a mesh from a set of leaf location codes. The leaves must tile the box.
  Mesh(SpaceTimeDomain<D> domain, std::vector<ElementId> leaves) : domain_(domain) {
    domain_.validate();
    std::sort(leaves.begin(), leaves.end());
    if (std::adjacent_find(leaves.begin(), leaves.end()) != leaves.end())
      throw PreconditionError("duplicate leaf in mesh");
    codes_ = std::move(leaves);
    elements_.reserve(codes_.size());
    for (ElementId id : codes_) {
      if (id == 0) throw PreconditionError("invalid location code 0");
      ElementType e;
      e.id = id;
      e.level = morton::level_of<D>(id);
      if (e.level > morton::max_level<D>())
        throw CapacityError("element level exceeds supported depth");
      e.coords = morton::coords_of<D>(id);
      elements_.push_back(e);
      max_level_ = std::max(max_level_, e.level);
      min_level_ = std::min(min_level_, e.level);
    }
    check_tiling();
  }

  const SpaceTimeDomain<D>& domain() const { return domain_; }
  std::span<const ElementType> elements() const { return elements_; }
  std::size_t size() const { return elements_.size(); }
  const ElementType& element(std::size_t i) const { return elements_[i]; }
  std::span<const ElementId> ids() const { return codes_; }
  int max_level() const { return max_level_; }
  int min_level() const { return min_level_; }

  std::optional<std::size_t> index_of(ElementId id) const {
    auto it = std::lower_bound(codes_.begin(), codes_.end(), id);
    if (it == codes_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - codes_.begin());
  }
  bool is_leaf(ElementId id) const { return index_of(id).has_value(); }

  Point<D> anchor(const ElementType& e) const {
    Point<D> p{};
    const double n = std::ldexp(1.0, e.level);
    for (int a = 0; a < D; ++a)
      p[a] = domain_.extent[a].lower + domain_.extent[a].length() * double(e.coords[a]) / n;
    return p;
  }

  Point<D> size(const ElementType& e) const {
    Point<D> s{};
    for (int a = 0; a < D; ++a) s[a] = std::ldexp(domain_.extent[a].length(), -e.level);
    return s;
  }

  /// Element size h_K: the longest edge (all edges are equal on a cube-shaped domain).
  double h(const ElementType& e) const {
    const auto s = size(e);
    return *std::max_element(s.begin(), s.end());
  }

  double volume(const ElementType& e) const {
    double v = 1.0;
    for (double s : size(e)) v *= s;
    return v;
  }

  /// Physical point of reference coordinates xi in [0,1]^D on element e.
  Point<D> map(const ElementType& e, const Point<D>& xi) const {
    const auto p0 = anchor(e);
    const auto s = size(e);
    Point<D> x{};
    for (int a = 0; a < D; ++a) x[a] = p0[a] + s[a] * xi[a];
    return x;
  }

  Point<D> to_reference(const ElementType& e, const Point<D>& x) const {
    const auto p0 = anchor(e);
    const auto s = size(e);
    Point<D> xi{};
    for (int a = 0; a < D; ++a) xi[a] = std::clamp((x[a] - p0[a]) / s[a], 0.0, 1.0);
    return xi;
  }

  /// The leaf covering cell `c` at `level`: the cell itself or its nearest leaf
  /// ancestor. Empty if the cell is outside the box or has been refined.
  std::optional<std::size_t> leaf_containing_cell(int level, const IntPoint<D>& c) const {
    const std::int64_t n = std::int64_t{1} << level;
    for (int a = 0; a < D; ++a)
      if (c[a] < 0 || c[a] >= n) return std::nullopt;
    ElementId code = morton::encode<D>(level, c);
    for (int l = level; l >= 0; --l) {
      if (auto idx = index_of(code)) return idx;
      code = morton::parent<D>(code);
    }
    return std::nullopt;
  }

  /// Leaves across face (axis, side) of element `idx`; empty on the domain boundary.
  std::vector<std::size_t> face_neighbors(std::size_t idx, int axis, int side) const {
    const auto& e = elements_[idx];
    IntPoint<D> nc = e.coords;
    nc[axis] += side;
    const std::int64_t n = std::int64_t{1} << e.level;
    if (nc[axis] < 0 || nc[axis] >= n) return {};
    if (auto leaf = leaf_containing_cell(e.level, nc)) return {*leaf};
    std::vector<std::size_t> out;
    collect_face_descendants(morton::encode<D>(e.level, nc), axis, side, out);
    return out;
  }

  /// Leaf containing physical point p (points on shared faces resolve to the upper cell).
  std::optional<std::size_t> locate(const Point<D>& p) const {
    if (!domain_.contains(p)) return std::nullopt;
    IntPoint<D> c{};
    const std::int64_t n = std::int64_t{1} << max_level_;
    for (int a = 0; a < D; ++a) {
      const double r = (p[a] - domain_.extent[a].lower) / domain_.extent[a].length();
      c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(r * double(n))), 0, n - 1);
    }
    return leaf_containing_cell(max_level_, c);
  }

  /// True if no two face-adjacent leaves differ by more than one level.
  bool is_balanced() const { return unbalanced_coarse_leaves().empty(); }

  /// Coarse leaves that are face-adjacent to a leaf more than one level finer.
  std::vector<ElementId> unbalanced_coarse_leaves() const {
    std::set<ElementId> marks;
    for (const auto& e : elements_) {
      if (e.level < 2) continue;
      for (int axis = 0; axis < D; ++axis)
        for (int side : {-1, 1}) {
          IntPoint<D> nc = e.coords;
          nc[axis] += side;
          if (auto leaf = leaf_containing_cell(e.level, nc))
            if (elements_[*leaf].level < e.level - 1) marks.insert(elements_[*leaf].id);
        }
    }
    return {marks.begin(), marks.end()};
  }

  double h_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : elements_) m = std::min(m, h(e));
    return m;
  }
  double h_max() const {
    double m = 0.0;
    for (const auto& e : elements_) m = std::max(m, h(e));
    return m;
  }

private:
  void collect_face_descendants(ElementId code, int axis, int side, std::vector<std::size_t>& out) const {
    const int level = morton::level_of<D>(code);
    if (level >= max_level_) return;
    // children touching the face shared with the element we came from
    const unsigned bit = side > 0 ? 0u : 1u;
    for (unsigned c = 0; c < (1u << D); ++c) {
      if (((c >> axis) & 1u) != bit) continue;
      const ElementId ch = morton::child<D>(code, c);
      if (auto idx = index_of(ch))
        out.push_back(*idx);
      else
        collect_face_descendants(ch, axis, side, out);
    }
  }

  void check_tiling() const {
    // no leaf may have a leaf ancestor, and leaf volumes must add up to the box
    unsigned __int128 vol = 0;
    for (const auto& e : elements_) {
      ElementId code = e.id;
      for (int l = e.level; l > 0; --l) {
        code = morton::parent<D>(code);
        if (index_of(code)) throw PreconditionError("leaf overlaps one of its ancestors");
      }
      vol += static_cast<unsigned __int128>(1) << (D * (max_level_ - e.level));
    }
    if (vol != static_cast<unsigned __int128>(1) << (D * max_level_))
      throw PreconditionError("leaves do not tile the domain");
  }

  SpaceTimeDomain<D> domain_;
  std::vector<ElementId> codes_;
  std::vector<ElementType> elements_;
  int max_level_ = 0;
  int min_level_ = std::numeric_limits<int>::max();
};

/// Unit box [0,1]^D.
template <int D>
SpaceTimeDomain<D> unit_domain() {
  return SpaceTimeDomain<D>{};
}

/// Uniform tiling with 2^(level*D) congruent elements.
template <int D>
Mesh<D> uniform_mesh(const SpaceTimeDomain<D>& domain, int level) {
  if (level < 0) throw PreconditionError("level must be nonnegative");
  if (level > morton::max_level<D>() || level * D > 30)
    throw CapacityError("uniform mesh of level " + std::to_string(level) + " exceeds index capacity");
  const std::int64_t n = std::int64_t{1} << level;
  const std::int64_t count = std::int64_t{1} << (level * D);
  std::vector<ElementId> ids;
  ids.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    IntPoint<D> c{};
    std::int64_t r = i;
    for (int a = 0; a < D; ++a) {
      c[a] = r % n;
      r /= n;
    }
    ids.push_back(morton::encode<D>(level, c));
  }
  return Mesh<D>(domain, std::move(ids));
}

/// Replaces every marked leaf by its 2^D children.
template <int D>
Mesh<D> refine(const Mesh<D>& mesh, std::span<const ElementId> marked) {
  if (marked.empty()) return mesh;
  std::vector<ElementId> sorted(marked.begin(), marked.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (ElementId id : sorted)
    if (!mesh.is_leaf(id)) throw InvalidMarkError("element " + std::to_string(id) + " is not a leaf");
  std::vector<ElementId> ids;
  ids.reserve(mesh.size() + sorted.size() * ((1u << D) - 1));
  for (ElementId id : mesh.ids())
    if (!std::binary_search(sorted.begin(), sorted.end(), id)) ids.push_back(id);
  for (ElementId id : sorted) {
    if (morton::level_of<D>(id) + 1 > morton::max_level<D>())
      throw CapacityError("refinement exceeds supported depth");
    for (unsigned c = 0; c < (1u << D); ++c) ids.push_back(morton::child<D>(id, c));
  }
  return Mesh<D>(mesh.domain(), std::move(ids));
}

template <int D>
Mesh<D> refine(const Mesh<D>& mesh, const std::vector<ElementId>& marked) {
  return refine(mesh, std::span<const ElementId>(marked));
}

/// Smallest refinement of `mesh` in which face-adjacent leaves differ by at most one level.
template <int D>
Mesh<D> balance_2to1(const Mesh<D>& mesh) {
  Mesh<D> current = mesh;
  for (;;) {
    auto marks = current.unbalanced_coarse_leaves();
    if (marks.empty()) return current;
    current = refine(current, marks);
  }
}

/// Every leaf face exactly once. Requires a 2:1 balanced mesh.
template <int D>
std::vector<Face> enumerate_faces(const Mesh<D>& mesh) {
  if (!mesh.is_balanced()) throw PreconditionError("enumerate_faces requires a 2:1 balanced mesh");
  const auto& dom = mesh.domain();
  std::vector<Face> faces;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto& e = mesh.element(i);
    for (int axis = 0; axis < D; ++axis)
      for (int side : {-1, 1}) {
        auto nb = mesh.face_neighbors(i, axis, side);
        Face f;
        f.owner = e.id;
        f.owner_index = i;
        f.axis = axis;
        f.orientation = side;
        if (nb.empty()) {
          const double x = mesh.anchor(e)[axis] + (side > 0 ? mesh.size(e)[axis] : 0.0);
          const double tol = 1e-12 * dom.extent[axis].length();
          if (axis == D - 1 && std::abs(x - dom.extent[axis].lower) <= tol)
            f.tag = BoundaryTag::initial;
          else if (axis == D - 1 && std::abs(x - dom.extent[axis].upper) <= tol)
            f.tag = BoundaryTag::final;
          else if (axis < D - 1)
            f.tag = BoundaryTag::spatial;
          else
            throw PreconditionError("boundary face does not lie on the domain boundary");
          faces.push_back(std::move(f));
          continue;
        }
        const int nlevel = mesh.element(nb.front()).level;
        if (nb.size() == 1 && nlevel == e.level) {
          if (side < 0) continue;  // emitted from the other side
        } else if (nb.size() == 1 && nlevel < e.level) {
          continue;  // emitted by the coarse owner
        } else {
          f.hanging = true;
        }
        for (auto j : nb) {
          f.neighbors.push_back(mesh.element(j).id);
          f.neighbor_indices.push_back(j);
        }
        faces.push_back(std::move(f));
      }
  }
  return faces;
}

} // namespace stgls
