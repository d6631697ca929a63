#pragma once

#include "kinebody/types.hpp"

#include <array>
#include <map>
#include <utility>
#include <vector>

namespace kinebody {

using Triangle = std::array<int, 3>;

/// Normalized cumulative arc length of a closed polyline, starting at 0 for
/// vertex 0. Degenerate loops fall back to uniform spacing.
inline std::vector<double> loop_arc_parameters(const MatX3& points, const std::vector<int>& loop) {
  const std::size_t n = loop.size();
  std::vector<double> params(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = points.row(loop[i]);
    const auto b = points.row(loop[(i + 1) % n]);
    const double len = (a - b).norm();
    if (i + 1 < n) params[i + 1] = params[i] + len;
    total += len;
  }
  if (!(total > 0.0)) {
    for (std::size_t i = 0; i < n; ++i) params[i] = static_cast<double>(i) / static_cast<double>(n);
    return params;
  }
  for (auto& p : params) p /= total;
  return params;
}

/// Monotone zipper triangulation between two closed loops given their
/// parameters in [0, 1). Both loops must run in the same direction and
/// their vertex 0s correspond. Emits |a| + |b| triangles; indices are local
/// loop positions tagged as (loop, index) by `emit`.
///
/// Triangles are (a_i, b_j, b_j+1) when advancing on b and (a_i, b_j, a_i+1)
/// when advancing on a; with `a` the inner loop of a counter-clockwise
/// annulus this yields counter-clockwise faces.
template <class Emit>
void zipper_triangulate(const std::vector<double>& pa, const std::vector<double>& pb, Emit&& emit) {
  const std::size_t na = pa.size();
  const std::size_t nb = pb.size();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < na || j < nb) {
    const double next_a = i + 1 < na ? pa[i + 1] : 1.0;
    const double next_b = j + 1 < nb ? pb[j + 1] : 1.0;
    const bool advance_b = j < nb && (i == na || next_b <= next_a);
    if (advance_b) {
      emit(i % na, true, j % nb, (j + 1) % nb, false);
      ++j;
    } else {
      emit(i % na, false, j % nb, (i + 1) % na, true);
      ++i;
    }
  }
}

/// Triangulates the annulus between two index loops over one shared vertex
/// array.
inline std::vector<Triangle> zipper_loops(const std::vector<int>& inner, const std::vector<double>& inner_params,
                                          const std::vector<int>& outer, const std::vector<double>& outer_params) {
  std::vector<Triangle> tris;
  tris.reserve(inner.size() + outer.size());
  zipper_triangulate(inner_params, outer_params,
                     [&](std::size_t ia, bool, std::size_t jb, std::size_t third, bool third_on_inner) {
                       const int c = third_on_inner ? inner[third] : outer[third];
                       tris.push_back({inner[ia], outer[jb], c});
                     });
  return tris;
}

/// True when consecutive loop entries (cyclically) are boundary edges, i.e.
/// edges used by exactly one triangle.
inline bool is_boundary_loop(const std::vector<Triangle>& triangles, const std::vector<int>& loop) {
  if (loop.size() < 3) return false;
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_use[{a, b}];
    }
  }
  for (std::size_t i = 0; i < loop.size(); ++i) {
    int a = loop[i], b = loop[(i + 1) % loop.size()];
    if (a > b) std::swap(a, b);
    auto it = edge_use.find({a, b});
    if (it == edge_use.end() || it->second != 1) return false;
  }
  return true;
}

}  // namespace kinebody
