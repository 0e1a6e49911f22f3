#pragma once

// Square-lattice tripartitions: two square blocks A and B sharing a vertical
// edge, C the complement. Smoother supports are disks around the two
// trisection points, their union, or a strip along the A-B interface.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "markovgap/covariance.hpp"

namespace markovgap {

/// Sites (x, y) with 0 <= x < width, 0 <= y < height, repeated for each layer.
/// Modes are layer-major: mode = layer * width * height + y * width + x.
struct Lattice {
  Index width = 0;
  Index height = 0;
  Index layers = 1;

  Lattice() = default;
  Lattice(Index w, Index h, Index l = 1) : width(w), height(h), layers(l) {
    if (w < 1 || h < 1 || l < 1) throw GeometryError("Lattice: dimensions must be positive");
  }

  Index sites_per_layer() const { return width * height; }
  Index n_modes() const { return width * height * layers; }
  bool contains(Index x, Index y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  Index mode_of(Index x, Index y, Index layer = 0) const {
    if (!contains(x, y) || layer < 0 || layer >= layers) {
      throw GeometryError("Lattice::mode_of: site (" + std::to_string(x) + ", " +
                          std::to_string(y) + ", " + std::to_string(layer) + ") out of range");
    }
    return layer * width * height + y * width + x;
  }

  struct Site {
    Index x, y, layer;
  };

  Site site_of(Index mode) const {
    if (mode < 0 || mode >= n_modes()) throw GeometryError("Lattice::site_of: mode out of range");
    const Index layer = mode / sites_per_layer();
    const Index rem = mode % sites_per_layer();
    return {rem % width, rem / width, layer};
  }

  /// All layers of the given planar sites, in increasing mode order.
  ModeMask modes_of_sites(const std::vector<std::array<Index, 2>>& sites) const {
    std::vector<Index> idx;
    idx.reserve(sites.size() * static_cast<std::size_t>(layers));
    for (Index l = 0; l < layers; ++l)
      for (const auto& s : sites) idx.push_back(mode_of(s[0], s[1], l));
    return ModeMask::from_unsorted(std::move(idx));
  }
};

enum class Region { A, B, C };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr Index kDefaultMarginMin = 8;

/// A occupies x in [ax, ax + L_A), y in [ay, ay + L_A); B sits to its right,
/// x in [ax + L_A, ax + L_A + L_B), y in [ay, ay + L_B). The shared edge is
/// the line x = ax + L_A - 1/2 between y = ay - 1/2 (south) and
/// y = ay + min(L_A, L_B) - 1/2 (north).
struct Tripartition {
  Lattice lattice;
  Index l_a = 0;
  Index l_b = 0;
  std::array<Index, 2> anchor{0, 0};
  std::vector<Region> region_of;  // indexed by mode
  ModeMask a, b, c;
  Point north, south;

  double interface_x() const { return north.x; }
  /// Smallest distance from the AB block to the lattice edge.
  Index margin() const {
    const Index right = lattice.width - (anchor[0] + l_a + l_b);
    const Index top = lattice.height - (anchor[1] + std::max(l_a, l_b));
    return std::min({anchor[0], anchor[1], right, top});
  }
};

/// Anchor placing the AB block at the centre of the lattice.
inline std::array<Index, 2> centered_anchor(const Lattice& lat, Index l_a, Index l_b) {
  return {(lat.width - l_a - l_b) / 2, (lat.height - std::max(l_a, l_b)) / 2};
}

inline Tripartition build_tripartition(const Lattice& lat, Index l_a, Index l_b,
                                       std::array<Index, 2> anchor,
                                       Index margin_min = kDefaultMarginMin) {
  if (l_a < 1 || l_b < 1) throw GeometryError("build_tripartition: block sizes must be positive");
  if (margin_min < 0) throw GeometryError("build_tripartition: negative margin");
  Tripartition tp;
  tp.lattice = lat;
  tp.l_a = l_a;
  tp.l_b = l_b;
  tp.anchor = anchor;
  const Index ax = anchor[0], ay = anchor[1];
  if (ax < 0 || ay < 0 || ax + l_a + l_b > lat.width || ay + std::max(l_a, l_b) > lat.height) {
    throw GeometryError("build_tripartition: blocks do not fit inside the " +
                        std::to_string(lat.width) + "x" + std::to_string(lat.height) + " lattice");
  }
  if (tp.margin() < margin_min) {
    throw GeometryError("build_tripartition: margin " + std::to_string(tp.margin()) +
                        " to the lattice edge is below the required " + std::to_string(margin_min));
  }

  tp.region_of.assign(static_cast<std::size_t>(lat.n_modes()), Region::C);
  std::vector<Index> a, b, c;
  for (Index m = 0; m < lat.n_modes(); ++m) {
    const auto s = lat.site_of(m);
    Region r = Region::C;
    if (s.x >= ax && s.x < ax + l_a && s.y >= ay && s.y < ay + l_a) {
      r = Region::A;
    } else if (s.x >= ax + l_a && s.x < ax + l_a + l_b && s.y >= ay && s.y < ay + l_b) {
      r = Region::B;
    }
    tp.region_of[static_cast<std::size_t>(m)] = r;
    (r == Region::A ? a : r == Region::B ? b : c).push_back(m);
  }
  tp.a = ModeMask(std::move(a));
  tp.b = ModeMask(std::move(b));
  tp.c = ModeMask(std::move(c));

  const double x_line = static_cast<double>(ax + l_a) - 0.5;
  tp.south = {x_line, static_cast<double>(ay) - 0.5};
  tp.north = {x_line, static_cast<double>(ay + std::min(l_a, l_b)) - 0.5};
  return tp;
}

inline Tripartition build_tripartition(const Lattice& lat, Index l_a, Index l_b,
                                       Index margin_min = kDefaultMarginMin) {
  return build_tripartition(lat, l_a, l_b, centered_anchor(lat, l_a, l_b), margin_min);
}

enum class SmootherShape { two_circles, joint, strip };

inline std::string to_string(SmootherShape s) {
  switch (s) {
    case SmootherShape::two_circles: return "two_circles";
    case SmootherShape::joint: return "joint";
    case SmootherShape::strip: return "strip";
  }
  return "unknown";
}

inline SmootherShape parse_shape(const std::string& s) {
  if (s == "two_circles") return SmootherShape::two_circles;
  if (s == "joint") return SmootherShape::joint;
  if (s == "strip") return SmootherShape::strip;
  throw ConfigError("unknown smoother shape '" + s + "' (expected two_circles, joint or strip)");
}

struct SmootherSupport {
  SmootherShape shape = SmootherShape::two_circles;
  Index radius = 0;
  std::vector<ModeMask> masks;  // N then S for two_circles, otherwise one mask

  ModeMask combined() const {
    ModeMask out;
    for (const auto& m : masks) out = mask_union(out, m);
    return out;
  }
  bool empty() const { return combined().empty(); }
};

/// Planar sites within Euclidean distance R of a point.
inline std::vector<std::array<Index, 2>> disk_sites(const Lattice& lat, Point center, Index r) {
  std::vector<std::array<Index, 2>> out;
  if (r <= 0) return out;
  const double r2 = static_cast<double>(r * r);
  for (Index y = 0; y < lat.height; ++y)
    for (Index x = 0; x < lat.width; ++x) {
      const double dx = static_cast<double>(x) - center.x;
      const double dy = static_cast<double>(y) - center.y;
      if (dx * dx + dy * dy <= r2) out.push_back({x, y});
    }
  return out;
}

inline Index count_disk_sites(Point center, Index r) {
  const Lattice big(4 * r + 8, 4 * r + 8);
  const Point shifted{center.x - std::floor(center.x) + 2.0 * r + 4.0,
                      center.y - std::floor(center.y) + 2.0 * r + 4.0};
  return static_cast<Index>(disk_sites(big, shifted, r).size());
}

inline SmootherSupport smoother_support(const Tripartition& tp, SmootherShape shape, Index r) {
  if (r < 0) throw GeometryError("smoother_support: negative radius");
  const Lattice& lat = tp.lattice;
  SmootherSupport sup;
  sup.shape = shape;
  sup.radius = r;

  auto checked_disk = [&](Point center) {
    const auto sites = disk_sites(lat, center, r);
    if (static_cast<Index>(sites.size()) != count_disk_sites(center, r)) {
      throw GeometryError("smoother_support: disk of radius " + std::to_string(r) +
                          " leaves the lattice");
    }
    return lat.modes_of_sites(sites);
  };

  switch (shape) {
    case SmootherShape::two_circles: {
      ModeMask n = checked_disk(tp.north);
      ModeMask s = checked_disk(tp.south);
      if (!disjoint(n, s)) {
        throw GeometryError("smoother_support: circles of radius " + std::to_string(r) +
                            " around N and S overlap");
      }
      sup.masks = {std::move(n), std::move(s)};
      break;
    }
    case SmootherShape::joint:
      sup.masks = {mask_union(checked_disk(tp.north), checked_disk(tp.south))};
      break;
    case SmootherShape::strip: {
      std::vector<std::array<Index, 2>> sites;
      if (r > 0) {
        const double x_line = tp.interface_x();
        for (Index y = tp.anchor[1]; y < tp.anchor[1] + std::min(tp.l_a, tp.l_b); ++y)
          for (Index x = 0; x < lat.width; ++x)
            if (std::abs(static_cast<double>(x) - x_line) <= static_cast<double>(r))
              sites.push_back({x, y});
        if (static_cast<Index>(sites.size()) != 2 * r * std::min(tp.l_a, tp.l_b)) {
          throw GeometryError("smoother_support: strip leaves the lattice");
        }
      }
      sup.masks = {lat.modes_of_sites(sites)};
      break;
    }
  }
  return sup;
}

}  // namespace markovgap
