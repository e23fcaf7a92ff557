// Top-down SVG of a scene graph.
#pragma once

#include "scenefactor/scene_graph.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <map>
#include <string>

namespace scenefactor {

struct RenderLayers {
  bool planes = true;
  bool proximity_edges = false;
  bool same_room_edges = true;
  bool same_wall_edges = true;
  bool origins = true;
  bool memberships = false;
};

namespace detail {

inline std::string fmt3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace detail

/// Planes are colored by the room they belong to (grey if none), same-room edges blue,
/// same-wall edges red, room origins as black dots and wall origins as red dots.
inline std::string render_svg(const SceneGraph& scene, const RenderLayers& layers = {}) {
  static constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
                                                           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#d62728"};
  constexpr double kScale = 20.0;  // px per m
  constexpr double kMargin = 20.0;

  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  auto grow = [&](const Vec2& p) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  };
  for (const auto& [id, n] : scene.nodes()) {
    if (n.plane) {
      grow(n.plane->endpoint0());
      grow(n.plane->endpoint1());
    }
    if (n.origin) grow(n.origin->xy);
  }
  if (!(xmin <= xmax)) xmin = xmax = ymin = ymax = 0.0;
  const double w = (xmax - xmin) * kScale + 2 * kMargin;
  const double h = (ymax - ymin) * kScale + 2 * kMargin;
  auto px = [&](const Vec2& p) { return detail::fmt3((p.x() - xmin) * kScale + kMargin); };
  auto py = [&](const Vec2& p) { return detail::fmt3((ymax - p.y()) * kScale + kMargin); };

  std::map<NodeId, std::string> color;
  int room_index = 0;
  for (NodeId r : scene.ids_of(NodeKind::room)) {
    const char* c = kPalette[static_cast<std::size_t>(room_index++) % kPalette.size()];
    for (NodeId m : scene.members_of(r)) color.emplace(m, c);
  }

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt3(w) + "\" height=\"" + detail::fmt3(h) +
         "\" viewBox=\"0 0 " + detail::fmt3(w) + " " + detail::fmt3(h) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto centroid_of = [&](NodeId id) -> Vec2 {
    const auto& n = scene.node(id);
    return n.plane ? n.plane->centroid : n.origin->xy;
  };
  auto edge_line = [&](const SceneEdge& e, const char* stroke, const char* width, const char* cls) {
    const Vec2 a = centroid_of(e.src), b = centroid_of(e.dst);
    out += "<line class=\"" + std::string(cls) + "\" x1=\"" + px(a) + "\" y1=\"" + py(a) + "\" x2=\"" + px(b) +
           "\" y2=\"" + py(b) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + width + "\"/>\n";
  };
  for (const auto& e : scene.edges()) {
    if (e.kind == EdgeKind::proximity && layers.proximity_edges) edge_line(e, "#cccccc", "0.5", "proximity");
    if (e.kind == EdgeKind::membership && layers.memberships) edge_line(e, "#999999", "0.5", "membership");
  }
  for (const auto& e : scene.edges()) {
    if (e.kind == EdgeKind::same_room && layers.same_room_edges) edge_line(e, "blue", "1", "same_room");
    if (e.kind == EdgeKind::same_wall && layers.same_wall_edges) edge_line(e, "red", "1.5", "same_wall");
  }
  if (layers.planes) {
    for (const auto& [id, n] : scene.nodes()) {
      if (!n.plane) continue;
      const Vec2 a = n.plane->endpoint0(), b = n.plane->endpoint1();
      auto it = color.find(id);
      const std::string c = it == color.end() ? "#555555" : it->second;
      out += "<line class=\"plane\" data-id=\"" + std::to_string(id) + "\" x1=\"" + px(a) + "\" y1=\"" + py(a) +
             "\" x2=\"" + px(b) + "\" y2=\"" + py(b) + "\" stroke=\"" + c + "\" stroke-width=\"3\"/>\n";
    }
  }
  if (layers.origins) {
    for (const auto& [id, n] : scene.nodes()) {
      if (!n.origin) continue;
      const bool room = n.kind == NodeKind::room;
      out += "<circle class=\"" + std::string(room ? "room" : "wall") + "\" data-id=\"" + std::to_string(id) +
             "\" cx=\"" + px(n.origin->xy) + "\" cy=\"" + py(n.origin->xy) + "\" r=\"" + (room ? "4" : "2.5") +
             "\" fill=\"" + (room ? "black" : "red") + "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace scenefactor
