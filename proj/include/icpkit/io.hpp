#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "icpkit/errors.hpp"
#include "icpkit/geometry.hpp"
#include "icpkit/slam.hpp"

namespace icpkit {

enum class CloudFormat { PlyAscii, Xyz, Csv };

/// Format by file extension: .ply, .xyz, .csv.
inline CloudFormat format_from_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".ply") return CloudFormat::PlyAscii;
  if (ext == ".xyz") return CloudFormat::Xyz;
  if (ext == ".csv") return CloudFormat::Csv;
  throw IoError("cannot infer cloud format from path '" + path +
                "' (expected .ply, .xyz or .csv)");
}

namespace detail {

/// Shortest exact decimal form of a double (17 significant digits).
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string rtrim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' ||
                        s.back() == '\t' || s.back() == '\n'))
    s.pop_back();
  return s;
}

inline bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == ' ' || c == '\t') continue;
    return c == '#';
  }
  return true;
}

/// Splits a row on whitespace and commas into doubles. Returns false on a
/// non-numeric token.
inline bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::string cleaned = line;
  for (char& c : cleaned)
    if (c == ',') c = ' ';
  std::istringstream ss(cleaned);
  std::string token;
  while (ss >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      return false;
    }
    if (used != token.size()) return false;
    out.push_back(v);
  }
  return true;
}

inline void check_normal(const Vec3& n, std::size_t line_no) {
  if (std::abs(n.norm() - 1.0) > 1e-9)
    throw ParseError(line_no, "normal is not unit length");
}

inline PointCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      line = rtrim(line);
      return true;
    }
    return false;
  };

  if (!next_line() || line != "ply") throw ParseError(1, "missing 'ply' magic");

  std::size_t vertex_count = 0;
  bool have_format = false;
  bool in_vertex_element = false;
  bool seen_vertex_element = false;
  std::vector<std::string> props;
  while (true) {
    if (!next_line()) throw ParseError(line_no, "unterminated header");
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "format") {
      std::string kind, version;
      ss >> kind >> version;
      if (kind != "ascii" || version != "1.0")
        throw ParseError(line_no, "only 'format ascii 1.0' is supported");
      have_format = true;
    } else if (word == "element") {
      std::string name;
      long long count = -1;
      ss >> name >> count;
      if (name != "vertex")
        throw UnsupportedPropertyError("element '" + name +
                                       "' (only vertex is supported)");
      if (seen_vertex_element)
        throw ParseError(line_no, "duplicate vertex element");
      if (count < 0) throw ParseError(line_no, "bad vertex count");
      vertex_count = static_cast<std::size_t>(count);
      in_vertex_element = true;
      seen_vertex_element = true;
    } else if (word == "property") {
      std::string type, name;
      ss >> type >> name;
      if (!in_vertex_element)
        throw ParseError(line_no, "property outside an element");
      if (type != "float" && type != "double" && type != "float32" &&
          type != "float64")
        throw UnsupportedPropertyError("property type '" + type + "'");
      props.push_back(name);
    } else {
      throw ParseError(line_no, "unrecognized header line '" + word + "'");
    }
  }
  if (!have_format) throw ParseError(line_no, "missing format line");
  if (!seen_vertex_element)
    throw ParseError(line_no, "missing vertex element");

  bool with_normals = false;
  if (props == std::vector<std::string>{"x", "y", "z"}) {
    with_normals = false;
  } else if (props ==
             std::vector<std::string>{"x", "y", "z", "nx", "ny", "nz"}) {
    with_normals = true;
  } else {
    throw UnsupportedPropertyError(
        "vertex properties must be x y z [nx ny nz]");
  }

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<double> row;
  for (std::size_t i = 0; i < vertex_count; ++i) {
    do {
      if (!next_line())
        throw ParseError(line_no, "expected " + std::to_string(vertex_count) +
                                      " vertex rows, file ended early");
    } while (blank_or_comment(line));
    if (!parse_row(line, row) || row.size() != props.size())
      throw ParseError(line_no, "malformed vertex row");
    cloud.points.emplace_back(row[0], row[1], row[2]);
    if (with_normals) {
      const Vec3 n(row[3], row[4], row[5]);
      check_normal(n, line_no);
      cloud.normals.push_back(n);
    }
  }
  return cloud;
}

inline PointCloud read_rows(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    line = rtrim(line);
    if (blank_or_comment(line)) continue;
    if (!parse_row(line, row))
      throw ParseError(line_no, "malformed row");
    if (row.size() != 3 && row.size() != 6)
      throw ParseError(line_no, "expected 3 or 6 columns, got " +
                                    std::to_string(row.size()));
    if (columns == 0) columns = row.size();
    if (row.size() != columns)
      throw ParseError(line_no, "inconsistent column count");
    cloud.points.emplace_back(row[0], row[1], row[2]);
    if (columns == 6) {
      const Vec3 n(row[3], row[4], row[5]);
      check_normal(n, line_no);
      cloud.normals.push_back(n);
    }
  }
  return cloud;
}

}  // namespace detail

inline PointCloud read_cloud(const std::string& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  switch (format) {
    case CloudFormat::PlyAscii:
      return detail::read_ply(in);
    case CloudFormat::Xyz:
    case CloudFormat::Csv:
      return detail::read_rows(in);
  }
  throw IoError("unknown format");
}

inline PointCloud read_cloud(const std::string& path) {
  return read_cloud(path, format_from_path(path));
}

inline void write_cloud(const PointCloud& cloud, const std::string& path,
                        CloudFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  const bool normals = cloud.has_normals();
  const char* sep = format == CloudFormat::Csv ? "," : " ";
  if (format == CloudFormat::PlyAscii) {
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (normals)
      out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "end_header\n";
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << detail::format_double(p.x()) << sep << detail::format_double(p.y())
        << sep << detail::format_double(p.z());
    if (normals) {
      const Vec3& n = cloud.normals[i];
      out << sep << detail::format_double(n.x()) << sep
          << detail::format_double(n.y()) << sep
          << detail::format_double(n.z());
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline void write_cloud(const PointCloud& cloud, const std::string& path) {
  write_cloud(cloud, path, format_from_path(path));
}

/// World fixture: JSON with walls [[x1,y1,x2,y2],...] and optional
/// landmarks [[x,y,confidence],...] (confidence > 1).
inline World load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("world file: ") + e.what());
  }

  World world;
  try {
    for (const auto& w : doc.at("walls")) {
      if (!w.is_array() || w.size() != 4)
        throw ParseError(0, "each wall needs 4 numbers [x1,y1,x2,y2]");
      world.walls.push_back({Eigen::Vector2d(w[0].get<double>(), w[1].get<double>()),
                             Eigen::Vector2d(w[2].get<double>(), w[3].get<double>())});
    }
    if (doc.contains("landmarks")) {
      for (const auto& l : doc.at("landmarks")) {
        if (!l.is_array() || l.size() != 3)
          throw ParseError(0, "each landmark needs 3 numbers [x,y,confidence]");
        world.landmarks.push_back(
            {Eigen::Vector2d(l[0].get<double>(), l[1].get<double>()),
             l[2].get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("world file: ") + e.what());
  }

  if (world.walls.empty())
    throw Error("InvalidWorld", "world has no walls");
  for (const Segment2& w : world.walls)
    if ((w.b - w.a).norm() <= 0.0)
      throw Error("InvalidWorld", "zero-length wall segment");
  for (const Landmark& l : world.landmarks)
    if (!(l.confidence > 1.0))
      throw Error("InvalidWorld", "landmark confidence must exceed 1");
  return world;
}

inline void save_world(const World& world, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["walls"] = nlohmann::json::array();
  for (const Segment2& w : world.walls)
    doc["walls"].push_back({w.a.x(), w.a.y(), w.b.x(), w.b.y()});
  doc["landmarks"] = nlohmann::json::array();
  for (const Landmark& l : world.landmarks)
    doc["landmarks"].push_back({l.position.x(), l.position.y(), l.confidence});
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Trajectory fixture: CSV rows x,y,theta.
inline std::vector<Pose2> load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<Pose2> traj;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::rtrim(line);
    if (detail::blank_or_comment(line)) continue;
    if (!detail::parse_row(line, row) || row.size() != 3)
      throw ParseError(line_no, "expected 'x,y,theta'");
    traj.push_back({row[0], row[1], row[2]});
  }
  return traj;
}

inline void save_trajectory(const std::vector<Pose2>& traj,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const Pose2& p : traj)
    out << detail::format_double(p.x) << "," << detail::format_double(p.y)
        << "," << detail::format_double(p.theta) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace icpkit
