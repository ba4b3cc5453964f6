#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace emcf {

struct Vec2 {
  double r = 0.0;
  double z = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.r + b.r, a.z + b.z}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.r - b.r, a.z - b.z}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a.r, c * a.z}; }
inline double dot(Vec2 a, Vec2 b) { return a.r * b.r + a.z * b.z; }
inline double norm(Vec2 a) { return std::hypot(a.r, a.z); }

enum class CurveKind { GraphOverRadius, ClosedLoop, AxisToInfinity };

inline std::string to_string(CurveKind k) {
  switch (k) {
    case CurveKind::GraphOverRadius: return "graph-over-radius";
    case CurveKind::ClosedLoop: return "closed-loop";
    case CurveKind::AxisToInfinity: return "axis-to-infinity";
  }
  return "?";
}

inline CurveKind curve_kind_from_string(const std::string& s) {
  if (s == "graph-over-radius") return CurveKind::GraphOverRadius;
  if (s == "closed-loop") return CurveKind::ClosedLoop;
  if (s == "axis-to-infinity") return CurveKind::AxisToInfinity;
  throw std::invalid_argument("unknown curve kind: " + s);
}

// Generating curve of a rotationally symmetric hypersurface in R^{n+1},
// sampled in the (r,z) half-plane. The surface is the revolution of the
// curve about the z-axis; n is the surface dimension.
struct ProfileCurve {
  int n = 2;
  std::vector<Vec2> samples;
  bool arclength_monotone = true;
  CurveKind kind = CurveKind::GraphOverRadius;

  std::size_t size() const { return samples.size(); }
  const Vec2& operator[](std::size_t i) const { return samples[i]; }
  Vec2& operator[](std::size_t i) { return samples[i]; }
};

struct MalformedCurveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// r >= 0 everywhere, consecutive samples distinct, and for graph-type
// curves r strictly increasing.
inline void validate(const ProfileCurve& c, std::size_t min_samples = 2) {
  if (c.n < 1) throw MalformedCurveError("rotational dimension must be >= 1");
  if (c.samples.size() < min_samples)
    throw MalformedCurveError("profile curve has too few samples");
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    if (!(c.samples[i].r >= 0.0))
      throw MalformedCurveError("profile sample with r < 0");
    if (i > 0) {
      const Vec2 d = c.samples[i] - c.samples[i - 1];
      if (norm(d) == 0.0)
        throw MalformedCurveError("consecutive duplicate profile samples");
      if (c.kind == CurveKind::GraphOverRadius && !(d.r > 0.0))
        throw MalformedCurveError("graph-over-radius curve must have strictly increasing r");
    }
  }
}

// Cone with vertex at the origin; link z = alpha*r (and z = -alpha*r for
// the double-symmetric variant).
struct Cone {
  double aperture = 0.0;
  bool double_symmetric = false;
};

inline ProfileCurve cone_profile(const Cone& cone, int n, double r_max, std::size_t m = 201) {
  ProfileCurve c;
  c.n = n;
  c.kind = CurveKind::GraphOverRadius;
  c.samples.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = r_max * double(i) / double(m - 1);
    c.samples.push_back({r, cone.aperture * r});
  }
  return c;
}

inline ProfileCurve mirror_z(const ProfileCurve& c) {
  ProfileCurve out = c;
  for (Vec2& p : out.samples) p.z = -p.z;
  return out;
}

// Complete a half profile (first sample on the z = 0 plane) to the full
// curve symmetric under z -> -z, traversed bottom to top.
inline ProfileCurve mirror_through_equator(const ProfileCurve& half) {
  ProfileCurve out;
  out.n = half.n;
  out.kind = CurveKind::AxisToInfinity;
  out.samples.reserve(2 * half.samples.size());
  for (auto it = half.samples.rbegin(); it != half.samples.rend(); ++it)
    out.samples.push_back({it->r, -it->z});
  for (std::size_t i = 1; i < half.samples.size(); ++i)
    out.samples.push_back(half.samples[i]);
  return out;
}

// --- serialization: CSV "r,z" plus JSON sidecar {n, kind, aperture?} ---

inline void write_profile_csv(const ProfileCurve& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "r,z\n";
  char buf[80];
  for (const Vec2& p : c.samples) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.r, p.z);
    out << buf;
  }
}

inline ProfileCurve read_profile_csv(const std::string& path, int n,
                                     CurveKind kind = CurveKind::GraphOverRadius) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  ProfileCurve c;
  c.n = n;
  c.kind = kind;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    c.samples.push_back({std::stod(a), std::stod(b)});
  }
  return c;
}

}  // namespace emcf
