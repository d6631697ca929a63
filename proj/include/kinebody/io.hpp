#pragma once

// Plain-text formats used by the command line: numeric row files, pose
// files, key-value configs, face parameters, keypoint lists and OBJ meshes.

#include "kinebody/face_model.hpp"
#include "kinebody/kba.hpp"
#include "kinebody/maps.hpp"
#include "kinebody/mesh.hpp"
#include "kinebody/types.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace kinebody {

struct TextRow {
  int line = 0;
  std::vector<std::string> tokens;
};

/// Splits text into whitespace-separated rows; '#' starts a comment, blank
/// lines are skipped.
inline std::vector<TextRow> tokenize_rows(const std::string& text) {
  std::vector<TextRow> rows;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    TextRow row{n, {}};
    for (std::string tok; ls >> tok;) row.tokens.push_back(tok);
    if (!row.tokens.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

inline double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = first + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw Error(ErrorKind::Parse, where + ": expected a finite number, got '" + tok + "'");
  return v;
}

inline std::string line_label(const std::string& source, int line) { return source + ":" + std::to_string(line); }

/// Numeric rows with a fixed set of accepted widths.
inline std::vector<std::vector<double>> parse_numeric_rows(const std::string& text, const std::string& source,
                                                           std::initializer_list<std::size_t> widths) {
  std::vector<std::vector<double>> out;
  for (const auto& row : tokenize_rows(text)) {
    bool ok = false;
    for (auto w : widths) ok |= row.tokens.size() == w;
    if (!ok) {
      std::string allowed;
      for (auto w : widths) allowed += (allowed.empty() ? "" : " or ") + std::to_string(w);
      throw Error(ErrorKind::Parse, line_label(source, row.line) + ": expected " + allowed + " values, got " +
                                        std::to_string(row.tokens.size()));
    }
    std::vector<double> vals;
    for (const auto& t : row.tokens) vals.push_back(parse_double(t, line_label(source, row.line)));
    out.push_back(std::move(vals));
  }
  if (!out.empty())
    for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i].size() != out[0].size())
        throw Error(ErrorKind::Parse, source + ": rows have inconsistent widths");
  return out;
}

/// Pose file: one axis-angle triple per joint, plus an optional
/// `translation x y z` line.
struct PoseText {
  std::vector<Vec3> axis_angles;
  Vec3 translation = Vec3::Zero();
};

inline PoseText parse_pose_text(const std::string& text, const std::string& source) {
  PoseText out;
  for (const auto& row : tokenize_rows(text)) {
    const auto where = line_label(source, row.line);
    if (row.tokens[0] == "translation") {
      if (row.tokens.size() != 4) throw Error(ErrorKind::Parse, where + ": translation needs 3 values");
      out.translation = Vec3(parse_double(row.tokens[1], where), parse_double(row.tokens[2], where),
                             parse_double(row.tokens[3], where));
      continue;
    }
    if (row.tokens.size() != 3) throw Error(ErrorKind::Parse, where + ": expected an axis-angle triple");
    out.axis_angles.emplace_back(parse_double(row.tokens[0], where), parse_double(row.tokens[1], where),
                                 parse_double(row.tokens[2], where));
  }
  return out;
}

/// `key value` (or `key = value`) lines.
inline std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& c : line)
      if (c == '=') c = ' ';
    std::istringstream ls(line);
    std::string key, value, extra;
    if (!(ls >> key)) continue;
    if (!(ls >> value)) throw Error(ErrorKind::Parse, line_label(source, n) + ": key '" + key + "' has no value");
    if (ls >> extra) throw Error(ErrorKind::Parse, line_label(source, n) + ": trailing tokens after '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

/// Face parameter file: lines `zeta ...`, `epsilon ...`, `gamma ...`,
/// `mu ...` (27 values, channel-major). Missing blocks are zero; shorter
/// vectors are zero-padded.
inline FaceParams parse_face_params(const std::string& text, const std::string& source) {
  FaceParams p;
  for (const auto& row : tokenize_rows(text)) {
    const auto where = line_label(source, row.line);
    const std::string& key = row.tokens[0];
    std::vector<double> vals;
    for (std::size_t i = 1; i < row.tokens.size(); ++i) vals.push_back(parse_double(row.tokens[i], where));
    auto fill = [&](VecX& v) {
      if (vals.size() > static_cast<std::size_t>(v.size()))
        throw Error(ErrorKind::Parse, where + ": too many values for " + key);
      for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
    };
    if (key == "zeta") fill(p.zeta);
    else if (key == "epsilon") fill(p.epsilon);
    else if (key == "gamma") fill(p.gamma);
    else if (key == "mu") {
      if (vals.size() != 27) throw Error(ErrorKind::Parse, where + ": mu needs 27 values");
      for (int c = 0; c < 3; ++c)
        for (int b = 0; b < kShBands; ++b) p.mu(c, b) = vals[static_cast<std::size_t>(9 * c + b)];
    } else {
      throw Error(ErrorKind::Parse, where + ": unknown key '" + key + "'");
    }
  }
  return p;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One line per joint: `id u v x y z conf`.
inline std::string format_keypoints(const DecodedKeypoints& k) {
  std::ostringstream os;
  os << "# id u v x y z conf\n";
  for (Eigen::Index j = 0; j < k.pixels.rows(); ++j) {
    os << j << ' ' << format_double(k.pixels(j, 0)) << ' ' << format_double(k.pixels(j, 1));
    for (int c = 0; c < 3; ++c) os << ' ' << format_double(k.coords(j, c));
    os << ' ' << format_double(k.confidence[j]) << '\n';
  }
  return os.str();
}

/// Keypoints from a text file: rows of `x y z` or `id u v x y z conf`.
struct KeypointText {
  MatX3 points;
  std::optional<MatX2> pixels;
};

inline KeypointText parse_keypoint_text(const std::string& text, const std::string& source) {
  const auto rows = parse_numeric_rows(text, source, {3, 7});
  if (rows.empty()) throw Error(ErrorKind::Parse, source + ": no keypoints");
  KeypointText out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.points.resize(n, 3);
  if (rows[0].size() == 7) out.pixels = MatX2(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.size() == 3) {
      out.points.row(i) = Vec3(r[0], r[1], r[2]);
    } else {
      (*out.pixels).row(i) = Vec2(r[1], r[2]);
      out.points.row(i) = Vec3(r[3], r[4], r[5]);
    }
  }
  return out;
}

inline MatX3 parse_points(const std::string& text, const std::string& source) {
  const auto rows = parse_numeric_rows(text, source, {3});
  MatX3 m(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = Vec3(rows[i][0], rows[i][1], rows[i][2]);
  return m;
}

/// Indexed-triangle mesh in OBJ syntax; `v x y z [r g b]`, 1-based `f`.
inline std::string format_obj(const MatX3& vertices, const std::vector<Triangle>& triangles,
                              const MatX3* colors = nullptr) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    os << "v " << format_double(vertices(i, 0)) << ' ' << format_double(vertices(i, 1)) << ' '
       << format_double(vertices(i, 2));
    if (colors && i < colors->rows())
      os << ' ' << format_double((*colors)(i, 0)) << ' ' << format_double((*colors)(i, 1)) << ' '
         << format_double((*colors)(i, 2));
    os << '\n';
  }
  for (const auto& t : triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  return os.str();
}

}  // namespace kinebody
