#pragma once

// Stimulus bundles: a directory of `.maze` files plus an `index` file with
// one `set_id base_id transform filename` line per maze. An optional
// `favorable` file annotates the designed low-cost half of each maze as
// `maze_id subgoal_x subgoal_y`. Practice mazes use set_id "practice".

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rrplan/error.hpp"
#include "rrplan/maze.hpp"

namespace rrplan {

inline constexpr const char* kPracticeSet = "practice";

struct BundleEntry {
  std::string set_id;
  std::string base_id;
  Transform transform = Transform::identity;
  std::string filename;
  Maze maze;  // id = filename stem

  bool is_practice() const { return set_id == kPracticeSet; }
};

struct Bundle {
  std::vector<BundleEntry> entries;
  std::map<std::string, State> favorable;

  /// Non-practice mazes in index order.
  std::vector<Maze> set_mazes() const {
    std::vector<Maze> out;
    for (const auto& e : entries)
      if (!e.is_practice()) out.push_back(e.maze);
    return out;
  }

  std::vector<const BundleEntry*> practice() const {
    std::vector<const BundleEntry*> out;
    for (const auto& e : entries)
      if (e.is_practice()) out.push_back(&e);
    return out;
  }

  /// set_id -> maze ids, each list sorted so sampling ignores file order.
  std::map<std::string, std::vector<std::string>> sets() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& e : entries)
      if (!e.is_practice()) out[e.set_id].push_back(e.maze.id());
    for (auto& [id, ids] : out) std::sort(ids.begin(), ids.end());
    return out;
  }

  const BundleEntry* find(const std::string& maze_id) const {
    for (const auto& e : entries)
      if (e.maze.id() == maze_id) return &e;
    return nullptr;
  }
};

inline Maze read_maze_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open maze file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_maze(ss.str(), path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_maze_file(const std::filesystem::path& path, const Maze& maze) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_maze(maze) << '\n';
}

inline std::string index_line(const BundleEntry& e) {
  return e.set_id + ' ' + e.base_id + ' ' + std::string(transform_name(e.transform)) + ' ' +
         e.filename;
}

inline Bundle load_bundle(const std::filesystem::path& dir) {
  const auto index_path = dir / "index";
  std::ifstream in(index_path);
  if (!in) throw ParseError("cannot open bundle index " + index_path.string());

  Bundle bundle;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    BundleEntry e;
    std::string transform, extra;
    if (!(fields >> e.set_id >> e.base_id >> transform >> e.filename) || (fields >> extra))
      throw ParseError(index_path.string() + ":" + std::to_string(lineno) +
                       ": expected `set_id base_id transform filename`");
    const auto t = parse_transform(transform);
    if (!t)
      throw ParseError(index_path.string() + ":" + std::to_string(lineno) +
                       ": unknown transform '" + transform + "'");
    e.transform = *t;
    e.maze = read_maze_file(dir / e.filename);
    if (bundle.find(e.maze.id()))
      throw ParseError(index_path.string() + ":" + std::to_string(lineno) + ": duplicate maze id '" +
                       e.maze.id() + "'");
    bundle.entries.push_back(std::move(e));
  }

  std::ifstream fav(dir / "favorable");
  for (int lineno = 1; fav && std::getline(fav, line); ++lineno) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string id;
    State s;
    if (!(fields >> id >> s.x >> s.y))
      throw ParseError("favorable:" + std::to_string(lineno) + ": expected `maze_id x y`");
    bundle.favorable[id] = s;
  }
  return bundle;
}

/// A bundle directory, or a single `.maze` file wrapped as a one-maze bundle.
inline Bundle load_mazes(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_bundle(path);
  if (!std::filesystem::exists(path)) throw ParseError("no such file or directory: " + path.string());
  Bundle b;
  Maze m = read_maze_file(path);
  b.entries.push_back({"-", m.id(), Transform::identity, path.filename().string(), m});
  return b;
}

}  // namespace rrplan
