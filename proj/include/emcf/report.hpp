#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "emcf/graph_flow.hpp"
#include "emcf/level_set.hpp"
#include "emcf/profile.hpp"

namespace emcf {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic JSON value: object keys sorted, floats printed with 17
// significant digits, so identical runs serialize byte-for-byte.
class Json {
 public:
  using Array = std::vector<Json>;
  using Object = std::map<std::string, Json>;

  Json() : v_(nullptr) {}
  Json(std::nullptr_t) : v_(nullptr) {}
  Json(bool b) : v_(b) {}
  Json(int i) : v_(std::int64_t(i)) {}
  Json(long i) : v_(std::int64_t(i)) {}
  Json(long long i) : v_(std::int64_t(i)) {}
  Json(std::size_t i) : v_(std::int64_t(i)) {}
  Json(double d) : v_(d) {}
  Json(const char* s) : v_(std::string(s)) {}
  Json(std::string s) : v_(std::move(s)) {}
  Json(Array a) : v_(std::move(a)) {}
  Json(Object o) : v_(std::move(o)) {}

  static Json array() { return Json(Array{}); }
  static Json object() { return Json(Object{}); }

  Json& operator[](const std::string& key) { return std::get<Object>(v_)[key]; }
  void push_back(Json j) { std::get<Array>(v_).push_back(std::move(j)); }

  bool is_array() const { return std::holds_alternative<Array>(v_); }

  static std::string format_double(double d) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", d);
    return buf;
  }

  void write(std::ostream& out, int indent = 0) const {
    struct Visitor {
      std::ostream& out;
      int indent;
      void operator()(std::nullptr_t) const { out << "null"; }
      void operator()(bool b) const { out << (b ? "true" : "false"); }
      void operator()(std::int64_t i) const { out << i; }
      void operator()(double d) const { out << format_double(d); }
      void operator()(const std::string& s) const {
        out << '"';
        for (char c : s) {
          switch (c) {
            case '"': out << "\\\""; break;
            case '\\': out << "\\\\"; break;
            case '\n': out << "\\n"; break;
            case '\t': out << "\\t"; break;
            default: out << c;
          }
        }
        out << '"';
      }
      void operator()(const Array& a) const {
        if (a.empty()) {
          out << "[]";
          return;
        }
        out << "[";
        for (std::size_t k = 0; k < a.size(); ++k) {
          if (k) out << ",";
          out << "\n" << std::string(indent + 2, ' ');
          a[k].write(out, indent + 2);
        }
        out << "\n" << std::string(indent, ' ') << "]";
      }
      void operator()(const Object& o) const {
        if (o.empty()) {
          out << "{}";
          return;
        }
        out << "{";
        bool first = true;
        for (const auto& [k, v] : o) {
          if (!first) out << ",";
          first = false;
          out << "\n" << std::string(indent + 2, ' ') << '"' << k << "\": ";
          v.write(out, indent + 2);
        }
        out << "\n" << std::string(indent, ' ') << "}";
      }
    };
    std::visit(Visitor{out, indent}, v_);
  }

  std::string dump() const {
    std::ostringstream ss;
    write(ss);
    ss << "\n";
    return ss.str();
  }

 private:
  std::variant<std::nullptr_t, bool, std::int64_t, double, std::string, Array, Object> v_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

inline void write_json(const std::string& path, const Json& j) {
  write_text(path, j.dump());
}

// trajectory dump: one row per stored time
inline void write_trajectory_csv(const GraphFlowTrajectory& traj, const std::string& path) {
  std::ostringstream ss;
  ss << "t,w0,w1,kappa,c2_proxy,e_rel,min_v,max_v\n";
  for (const auto& d : traj.diag) {
    ss << Json::format_double(d.t) << ',' << Json::format_double(d.w0) << ','
       << Json::format_double(d.w1) << ',' << Json::format_double(d.kappa) << ','
       << Json::format_double(d.c2_proxy) << ',' << Json::format_double(d.e_rel) << ','
       << Json::format_double(d.min_v) << ',' << Json::format_double(d.max_v) << '\n';
  }
  write_text(path, ss.str());
}

// flat binary field with a JSON header sidecar {nr, nz, h, n, t}
inline void write_field(const LevelSetField& f, const std::string& path_base) {
  {
    std::ofstream out(path_base + ".bin", std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path_base + ".bin");
    out.write(reinterpret_cast<const char*>(f.phi.data()),
              std::streamsize(f.phi.size() * sizeof(double)));
  }
  Json hdr = Json::object();
  hdr["nr"] = f.nr;
  hdr["nz"] = f.nz;
  hdr["h"] = f.grid.h;
  hdr["n"] = f.grid.n;
  hdr["t"] = f.t;
  hdr["r_max"] = f.grid.r_max;
  hdr["z_min"] = f.grid.z_min;
  hdr["z_max"] = f.grid.z_max;
  write_json(path_base + ".json", hdr);
}

inline LevelSetField read_field(const std::string& path_base) {
  std::ifstream hdr(path_base + ".json");
  if (!hdr) throw IoError("cannot open: " + path_base + ".json");
  // minimal parse of the fixed header layout via key scanning
  std::string text((std::istreambuf_iterator<char>(hdr)), {});
  auto grab = [&](const std::string& key) {
    const auto p = text.find('"' + key + '"');
    if (p == std::string::npos) throw IoError("missing header key " + key);
    const auto c = text.find(':', p);
    return std::stod(text.substr(c + 1));
  };
  GridParams g;
  g.h = grab("h");
  g.n = int(grab("n"));
  g.r_max = grab("r_max");
  g.z_min = grab("z_min");
  g.z_max = grab("z_max");
  LevelSetField f(g);
  f.t = grab("t");
  if (f.nr != int(grab("nr")) || f.nz != int(grab("nz")))
    throw IoError("header dimensions do not match the grid spec");
  std::ifstream in(path_base + ".bin", std::ios::binary);
  if (!in) throw IoError("cannot open: " + path_base + ".bin");
  in.read(reinterpret_cast<char*>(f.phi.data()), std::streamsize(f.phi.size() * sizeof(double)));
  if (std::size_t(in.gcount()) != f.phi.size() * sizeof(double))
    throw IoError("short read: " + path_base + ".bin");
  return f;
}

inline void write_events_jsonl(const std::vector<FlowEvent>& events, const std::string& path) {
  std::ostringstream ss;
  for (const auto& e : events) {
    Json j = Json::object();
    j["t"] = e.t;
    j["kind"] = to_string(e.kind);
    j["components_before"] = e.components_before;
    j["components_after"] = e.components_after;
    std::ostringstream line;
    j.write(line, 0);
    std::string s = line.str();
    for (char& c : s)
      if (c == '\n') c = ' ';
    ss << s << "\n";
  }
  write_text(path, ss.str());
}

inline void write_contour_csv(const LevelSetField& f, const std::string& path) {
  const auto segs = interface_segments(f);
  std::ostringstream ss;
  ss << "r,z\n";
  for (const auto& [a, b] : segs) {
    const Vec2 mid = 0.5 * (a + b);
    ss << Json::format_double(mid.r) << ',' << Json::format_double(mid.z) << '\n';
  }
  write_text(path, ss.str());
}

}  // namespace emcf
