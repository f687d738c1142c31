#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "udc/bench.hpp"

namespace udc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void fail(int line, const std::string& why) {
  throw Error("tsplib_parse", "line " + std::to_string(line) + ": " + why);
}

}  // namespace

Instance parse_tsplib_text(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  int dimension = -1;
  bool saw_type = false, saw_weight = false, in_coords = false;
  std::string inst_name = name;
  std::vector<int> ids;
  std::vector<Point> pts;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (in_coords) {
      if (upper(line) == "EOF") break;
      std::istringstream ls(line);
      long long id;
      double x, y;
      std::string extra;
      if (!(ls >> id >> x >> y) || (ls >> extra)) fail(line_no, "malformed coordinate line '" + line + "'");
      if (!std::isfinite(x) || !std::isfinite(y)) fail(line_no, "non-finite coordinate");
      ids.push_back(static_cast<int>(id));
      pts.push_back({x, y});
      continue;
    }
    const std::string up = upper(line);
    if (up == "NODE_COORD_SECTION") {
      if (!saw_type) fail(line_no, "NODE_COORD_SECTION before TYPE");
      if (!saw_weight) fail(line_no, "NODE_COORD_SECTION before EDGE_WEIGHT_TYPE");
      if (dimension < 0) fail(line_no, "NODE_COORD_SECTION before DIMENSION");
      in_coords = true;
      continue;
    }
    if (up == "EOF") break;
    const auto colon = line.find(':');
    if (colon == std::string::npos) fail(line_no, "expected 'KEY : value', got '" + line + "'");
    const std::string key = upper(trim(line.substr(0, colon)));
    const std::string value = trim(line.substr(colon + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (key == "NAME") {
      if (inst_name.empty()) inst_name = value;
    } else if (key == "TYPE") {
      if (upper(value) != "TSP") throw Error("unsupported_format", "line " + std::to_string(line_no) + ": TYPE " + value);
      saw_type = true;
    } else if (key == "EDGE_WEIGHT_TYPE") {
      if (upper(value) != "EUC_2D")
        throw Error("unsupported_format", "line " + std::to_string(line_no) + ": EDGE_WEIGHT_TYPE " + value);
      saw_weight = true;
    } else if (key == "DIMENSION") {
      std::size_t used = 0;
      long long d = -1;
      try {
        d = std::stoll(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || d < 2 || d > 10'000'000) fail(line_no, "bad DIMENSION '" + value + "'");
      dimension = static_cast<int>(d);
    } else if (key == "COMMENT") {
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }
  if (!in_coords) throw Error("tsplib_parse", "missing NODE_COORD_SECTION");
  if (static_cast<int>(pts.size()) != dimension)
    throw Error("tsplib_parse", "DIMENSION " + std::to_string(dimension) + " but " + std::to_string(pts.size()) +
                                    " coordinates");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<int>(i) + 1)
      throw Error("tsplib_parse", "node ids must run 1.." + std::to_string(dimension));
  }

  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  double sc = std::max(x1 - x0, y1 - y0);
  if (!(sc > 0)) sc = 1;
  Instance inst;
  inst.kind = ProblemKind::kTsp;
  inst.n = dimension;
  inst.name = inst_name;
  inst.scale = sc;
  for (const auto& p : pts) inst.coords.push_back({(p.x - x0) / sc, (p.y - y0) / sc});
  validate_instance(inst);
  return inst;
}

Instance parse_tsplib(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io_error", "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_tsplib_text(ss.str());
}

std::string tsplib_text(const Instance& inst) {
  if (inst.kind != ProblemKind::kTsp) throw Error("invalid_argument", "TSPLib export supports TSP only");
  std::ostringstream out;
  out << "NAME : " << (inst.name.empty() ? "udc" : inst.name) << "\n"
      << "TYPE : TSP\nDIMENSION : " << inst.n << "\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n";
  char buf[128];
  for (int i = 0; i < inst.n; ++i) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", i + 1, inst.coords[i].x * inst.scale,
                  inst.coords[i].y * inst.scale);
    out << buf;
  }
  out << "EOF\n";
  return out.str();
}

void write_tsplib(const std::string& path, const Instance& inst) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("io_error", "cannot write " + path);
  f << tsplib_text(inst);
}

}  // namespace udc
