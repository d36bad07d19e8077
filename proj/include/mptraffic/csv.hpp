#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "kinetic.hpp"
#include "macro_solver.hpp"
#include "micro_sim.hpp"

namespace mpt::csv {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

inline void write_record(std::ostream& o, const SpaceTimeRecord& r) {
  o << "t,x,rho,u\n";
  for (std::size_t k = 0; k < r.t.size(); ++k)
    for (std::size_t i = 0; i < r.x.size(); ++i)
      o << num(r.t[k]) << ',' << num(r.x[i]) << ',' << num(r.rho[k][i]) << ',' << num(r.u[k][i]) << '\n';
}

inline void write_probe(std::ostream& o, const ProbeSeries& p) {
  o << "t,rho,u,flow\n";
  for (std::size_t k = 0; k < p.t.size(); ++k)
    o << num(p.t[k]) << ',' << num(p.rho[k]) << ',' << num(p.u[k]) << ',' << num(p.flow[k]) << '\n';
}

// shortest exact text, for data that is read back
inline std::string exact(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_table(std::ostream& o, const UeTable& t) {
  o << "k,u_e\n";
  for (std::size_t i = 0; i < t.k.size(); ++i) o << exact(t.k[i]) << ',' << exact(t.ue[i]) << '\n';
}

inline UeTable read_table(std::istream& in) {
  UeTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,u_e", 0) != 0) throw ConfigError("u^e table: expected header 'k,u_e'");
  int no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
      throw ConfigError("u^e table: malformed line " + std::to_string(no));
    try {
      t.k.push_back(std::stod(a));
      t.ue.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw ConfigError("u^e table: bad number on line " + std::to_string(no));
    }
    if (t.k.size() > 1 && !(t.k.back() > t.k[t.k.size() - 2])) throw ConfigError("u^e table: k must increase");
  }
  if (t.k.size() < 2) throw ConfigError("u^e table: need at least two rows");
  return t;
}

inline UeTable read_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open u^e table '" + path + "'");
  return read_table(f);
}

inline void write_trajectory(std::ostream& o, const Trajectory& tr, bool with_a) {
  o << (with_a ? "t,vehicle_id,x,v,a\n" : "t,vehicle_id,x,v\n");
  for (std::size_t k = 0; k < tr.t.size(); ++k)
    for (std::size_t i = 0; i < tr.states[k].size(); ++i) {
      const auto& s = tr.states[k][i];
      o << num(tr.t[k]) << ',' << i << ',' << num(s.x) << ',' << num(s.v);
      if (with_a) o << ',' << num(s.a);
      o << '\n';
    }
}

}  // namespace mpt::csv
