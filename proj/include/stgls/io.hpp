#pragma once

// CSV and legacy-VTK output. Numbers are written in the shortest form that
// reads back to the same double.

#include <charconv>
#include <fstream>
#include <ostream>

#include "study.hpp"

namespace stgls {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf, end);
}

inline void write_profile_csv(std::ostream& os, const Profile& p) {
  os << "arc_length,u\n";
  for (auto [s, u] : p) os << format_double(s) << ',' << format_double(u) << '\n';
}

inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "h,eta,err_h,err_l2\n";
  for (const auto& r : rows)
    os << format_double(r.h) << ',' << format_double(r.eta) << ',' << format_double(r.err_h) << ','
       << format_double(r.err_l2) << '\n';
}

/// err_l2 is left empty for problems without an exact solution.
inline void write_trace_csv(std::ostream& os, const AdaptTrace& t) {
  os << "round,dof,eta,err_l2\n";
  for (const auto& r : t.rounds) {
    os << r.round << ',' << r.dof << ',' << format_double(r.eta) << ',';
    if (r.err_l2) os << format_double(*r.err_l2);
    os << '\n';
  }
}

inline void write_error_csv(std::ostream& os, double h, std::size_t dof, const ErrorReport& e, double eta) {
  os << "h,dof,eta,err_h,err_h_star,err_l2\n";
  os << format_double(h) << ',' << dof << ',' << format_double(eta) << ',' << format_double(e.err_h) << ','
     << format_double(e.err_h_star) << ',' << format_double(e.err_l2) << '\n';
}

/// Legacy ASCII unstructured grid of the element vertices with point data `u`
/// and the cell data `level`. Higher-order nodes are not written.
template <int D>
void write_vtk(std::ostream& os, const FieldFunction<D>& u, const std::string& title = "stgls") {
  const auto& mesh = u.mesh();
  const auto& nodes = u.nodes();
  const int k = u.degree();
  const int nv = 1 << D;
  // local node index of each element vertex in VTK order
  std::vector<int> corner(nv);
  const auto vtk_vertex = [](int v) {
    // VTK quads and hexahedra run counterclockwise in each (x, y) layer
    static constexpr int order[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    return order[v];
  };
  for (int v = 0; v < nv; ++v) {
    const int* c = vtk_vertex(v);
    int idx = 0, stride = 1;
    for (int a = 0; a < D; ++a) {
      idx += c[a] * k * stride;
      stride *= k + 1;
    }
    corner[v] = idx;
  }
  std::vector<int> point_of(nodes.size(), -1);
  std::vector<int> points;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const auto idx = nodes.element_nodes(e);
    for (int v = 0; v < nv; ++v) {
      const int n = idx[corner[v]];
      if (point_of[n] < 0) {
        point_of[n] = int(points.size());
        points.push_back(n);
      }
    }
  }
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << points.size() << " double\n";
  for (int n : points) {
    const auto& x = nodes.position(n);
    for (int a = 0; a < 3; ++a) os << (a ? " " : "") << (a < D ? format_double(x[a]) : "0");
    os << '\n';
  }
  os << "CELLS " << mesh.size() << ' ' << mesh.size() * (nv + 1) << '\n';
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const auto idx = nodes.element_nodes(e);
    os << nv;
    for (int v = 0; v < nv; ++v) os << ' ' << point_of[idx[corner[v]]];
    os << '\n';
  }
  const int cell_type = D == 1 ? 3 : D == 2 ? 9 : 12;
  os << "CELL_TYPES " << mesh.size() << '\n';
  for (std::size_t e = 0; e < mesh.size(); ++e) os << cell_type << '\n';
  os << "CELL_DATA " << mesh.size() << "\nSCALARS level int 1\nLOOKUP_TABLE default\n";
  for (const auto& e : mesh.elements()) os << e.level << '\n';
  os << "POINT_DATA " << points.size() << "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
  for (int n : points) os << format_double(u.coefficients()[n]) << '\n';
}

/// Opens `path` for writing or throws.
inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

} // namespace stgls
