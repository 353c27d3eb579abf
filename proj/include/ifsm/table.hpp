#pragma once

// Result tables (CSV plus a .meta sidecar) and the binary trajectory format.
//
// Trajectory layout, all little-endian:
//   "IFSM" | u32 version = 1 | u64 N | u64 stride | frames...
//   frame = f64 t | N x f64 values

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ifsm/dynamics.hpp"
#include "ifsm/error.hpp"

namespace ifsm {

struct Column {
  std::string name;
  std::string unit;
  std::string note;
};

using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Fixed schema per command. The first column is always `status` and the last
/// `message`; a failed computation is a row with an error status and empty
/// numeric cells, never a NaN.
class ResultTable {
 public:
  class RowRef {
   public:
    RowRef(ResultTable& t, std::size_t i) : t_(&t), i_(i) {}

    RowRef& set(const std::string& column, double v) {
      require(std::isfinite(v), ErrorKind::numeric, "non-finite value for column " + column);
      t_->cell(i_, column) = v == 0.0 ? 0.0 : v;  // no "-0" in output
      return *this;
    }
    RowRef& set(const std::string& column, int v) { return set(column, static_cast<std::int64_t>(v)); }
    RowRef& set(const std::string& column, std::size_t v) { return set(column, static_cast<std::int64_t>(v)); }
    RowRef& set(const std::string& column, std::int64_t v) {
      t_->cell(i_, column) = v;
      return *this;
    }
    RowRef& set(const std::string& column, bool v) { return set(column, std::string(v ? "true" : "false")); }
    RowRef& set(const std::string& column, const char* v) { return set(column, std::string(v)); }
    RowRef& set(const std::string& column, std::string v) {
      t_->cell(i_, column) = std::move(v);
      return *this;
    }
    RowRef& status(const std::string& s) { return set("status", s); }
    RowRef& message(const std::string& s) { return set("message", s); }

   private:
    ResultTable* t_;
    std::size_t i_;
  };

  ResultTable() = default;

  ResultTable(std::string command, std::vector<Column> schema) : command_(std::move(command)) {
    columns_.push_back({"status", "", "ok, pass, fail or an error kind"});
    for (auto& c : schema) columns_.push_back(std::move(c));
    columns_.push_back({"message", "", "detail for non-ok rows"});
  }

  const std::string& command() const { return command_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return rows_.size(); }

  RowRef add_row(const std::string& status = "ok") {
    rows_.emplace_back(columns_.size());
    RowRef r(*this, rows_.size() - 1);
    r.status(status);
    return r;
  }

  /// Copies row i of a table with the same schema.
  void append_row(const ResultTable& other, std::size_t i) {
    require(other.columns_.size() == columns_.size(), ErrorKind::range, "schema mismatch appending to " + command_);
    for (std::size_t j = 0; j < columns_.size(); ++j)
      require(other.columns_[j].name == columns_[j].name, ErrorKind::range, "schema mismatch appending to " + command_);
    rows_.push_back(other.rows_.at(i));
  }

  RowRef row(std::size_t i) {
    require(i < rows_.size(), ErrorKind::range, "row index");
    return RowRef(*this, i);
  }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j].name == name) return j;
    fail(ErrorKind::range, "table " + command_ + " has no column " + name);
  }

  const Cell& at(std::size_t i, const std::string& column) const {
    require(i < rows_.size(), ErrorKind::range, "row index");
    return rows_[i][column_index(column)];
  }

  double number(std::size_t i, const std::string& column) const {
    const Cell& c = at(i, column);
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* n = std::get_if<std::int64_t>(&c)) return static_cast<double>(*n);
    fail(ErrorKind::range, "cell " + column + " of row " + std::to_string(i) + " is not numeric");
  }

  std::string text(std::size_t i, const std::string& column) const {
    const Cell& c = at(i, column);
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    return render(c);
  }

  std::string status(std::size_t i) const { return text(i, "status"); }

  /// True when every row reports ok or pass.
  bool all_ok() const {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto s = status(i);
      if (s != "ok" && s != "pass") return false;
    }
    return true;
  }

  std::string csv() const {
    std::ostringstream out;
    for (std::size_t j = 0; j < columns_.size(); ++j) out << (j ? "," : "") << quote(columns_[j].name);
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << quote(render(r[j]));
      out << '\n';
    }
    return out.str();
  }

  // metadata, written to the sidecar only
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  std::string code_version;

  std::string meta() const {
    std::ostringstream out;
    out << "command = " << command_ << '\n';
    out << "config_hash = " << hex64(config_hash) << '\n';
    out << "seed = " << seed << '\n';
    out << "code_version = " << code_version << '\n';
    out << "wall_time_s = " << format_double(wall_time) << '\n';
    out << "rows = " << rows_.size() << '\n';
    for (const auto& c : columns_) out << "column = " << c.name << " | " << c.unit << " | " << c.note << '\n';
    return out.str();
  }

  /// Writes dir/stem.csv and dir/stem.csv.meta.
  void write(const std::filesystem::path& dir, const std::string& stem) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create " + dir.string());
    const auto csv_path = dir / (stem + ".csv");
    write_text(csv_path, csv());
    write_text(csv_path.string() + ".meta", meta());
  }

 private:
  Cell& cell(std::size_t i, const std::string& column) { return rows_[i][column_index(column)]; }

  static std::string render(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* n = std::get_if<std::int64_t>(&c)) return std::to_string(*n);
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    return {};
  }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + '"';
  }

  static void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::io, "cannot write " + p.string());
    f << s;
    require(static_cast<bool>(f), ErrorKind::io, "write failed for " + p.string());
  }

  std::string command_;
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
};

// ----------------------------------------------------------- trajectories

namespace detail {

inline void put_le(std::string& buf, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(const std::string& buf, std::size_t& pos, int bytes) {
  require(pos + static_cast<std::size_t>(bytes) <= buf.size(), ErrorKind::io, "truncated trajectory file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kTrajectoryVersion = 1;

struct TrajectoryFile {
  std::uint32_t version = kTrajectoryVersion;
  std::uint64_t stride = 0;
  std::vector<Snapshot> frames;
};

inline std::string encode_trajectory(const std::vector<Snapshot>& frames, std::uint64_t stride) {
  const std::uint64_t n = frames.empty() ? 0 : frames.front().values.size();
  std::string buf = "IFSM";
  detail::put_le(buf, kTrajectoryVersion, 4);
  detail::put_le(buf, n, 8);
  detail::put_le(buf, stride, 8);
  for (const auto& f : frames) {
    require(f.values.size() == n, ErrorKind::range, "trajectory frames differ in length");
    detail::put_le(buf, std::bit_cast<std::uint64_t>(f.t), 8);
    for (double v : f.values) detail::put_le(buf, std::bit_cast<std::uint64_t>(v), 8);
  }
  return buf;
}

inline TrajectoryFile decode_trajectory(const std::string& buf) {
  require(buf.size() >= 24 && buf.compare(0, 4, "IFSM") == 0, ErrorKind::io, "not an IFSM trajectory");
  std::size_t pos = 4;
  TrajectoryFile out;
  out.version = static_cast<std::uint32_t>(detail::get_le(buf, pos, 4));
  require(out.version == kTrajectoryVersion, ErrorKind::io, "unsupported trajectory version " + std::to_string(out.version));
  const std::uint64_t n = detail::get_le(buf, pos, 8);
  out.stride = detail::get_le(buf, pos, 8);
  const std::size_t frame_bytes = 8 * (static_cast<std::size_t>(n) + 1);
  require((buf.size() - pos) % frame_bytes == 0, ErrorKind::io, "trajectory length is not a whole number of frames");
  while (pos < buf.size()) {
    Snapshot s;
    s.t = std::bit_cast<double>(detail::get_le(buf, pos, 8));
    s.values.resize(static_cast<std::size_t>(n));
    for (auto& v : s.values) v = std::bit_cast<double>(detail::get_le(buf, pos, 8));
    out.frames.push_back(std::move(s));
  }
  return out;
}

inline void write_trajectory(const std::filesystem::path& path, const std::vector<Snapshot>& frames,
                             std::uint64_t stride) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::io, "cannot write " + path.string());
  const std::string buf = encode_trajectory(frames, stride);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(static_cast<bool>(f), ErrorKind::io, "write failed for " + path.string());
}

inline TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::io, "cannot read " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_trajectory(buf);
}

}  // namespace ifsm
