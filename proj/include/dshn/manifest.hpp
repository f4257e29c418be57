#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dshn/hypergraph.hpp"

namespace dshn {

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex_digest(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex_digest(fnv1a(buf.str()));
}

/// Record of one command-line run: everything needed to re-run it and to
/// check that the re-run produced the same bytes.
struct RunManifest {
  using Entries = std::vector<std::pair<std::string, std::string>>;

  std::string subcommand;
  Entries flags;    // full flag set, defaults included, in registration order
  Entries seeds;    // named seeds actually used
  Entries inputs;   // path -> digest
  Entries outputs;  // path -> digest, in write order
  std::string stdout_digest;
  double duration_seconds = 0.0;

  const std::string* flag(const std::string& name) const {
    for (const auto& [k, v] : flags)
      if (k == name) return &v;
    return nullptr;
  }
};

inline void write_manifest(const RunManifest& m, std::ostream& out) {
  out << "subcommand=" << m.subcommand << '\n';
  for (const auto& [k, v] : m.flags) out << "flag." << k << '=' << v << '\n';
  for (const auto& [k, v] : m.seeds) out << "seed." << k << '=' << v << '\n';
  for (const auto& [k, v] : m.inputs) out << "input." << k << '=' << v << '\n';
  for (const auto& [k, v] : m.outputs) out << "output." << k << '=' << v << '\n';
  out << "stdout=" << m.stdout_digest << '\n';
  out << "duration_seconds=" << detail::format_double(m.duration_seconds) << '\n';
}

inline void write_manifest(const RunManifest& m, const std::string& path) {
  auto out = detail::open_out(path);
  write_manifest(m, out);
}

/// Splits `key=value` at the first '='. Blank and '#' lines are skipped.
inline std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in, const std::string& name) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(name + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

inline RunManifest read_manifest(std::istream& in, const std::string& name = "<manifest>") {
  RunManifest m;
  for (auto& [k, v] : read_key_values(in, name)) {
    auto strip = [&](std::string_view prefix) { return k.substr(prefix.size()); };
    if (k == "subcommand") m.subcommand = v;
    else if (k.starts_with("flag.")) m.flags.emplace_back(strip("flag."), v);
    else if (k.starts_with("seed.")) m.seeds.emplace_back(strip("seed."), v);
    else if (k.starts_with("input.")) m.inputs.emplace_back(strip("input."), v);
    else if (k.starts_with("output.")) m.outputs.emplace_back(strip("output."), v);
    else if (k == "stdout") m.stdout_digest = v;
    else if (k == "duration_seconds") m.duration_seconds = detail::parse_double(v, name);
    else throw ParseError(name + ": unknown manifest key '" + k + "'");
  }
  if (m.subcommand.empty()) throw ParseError(name + ": missing subcommand");
  return m;
}

inline RunManifest read_manifest(const std::string& path) {
  auto in = detail::open_in(path);
  return read_manifest(in, path);
}

}  // namespace dshn
