#include "mbsr/grid_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mbsr/binio.hpp"
#include "mbsr/hash.hpp"

namespace mbsr {

namespace {

constexpr char kMagic[4] = {'B', 'G', 'R', 'D'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kDateLen = 10;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

double parse_double(const std::string& tok, const std::string& what) {
  const std::string t = trim(tok);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc{} || ptr != end || t.empty()) throw Error("cannot parse " + what + ": '" + t + "'");
  return v;
}

std::size_t parse_dim(const std::string& tok, const std::string& what) {
  const std::string t = trim(tok);
  std::size_t v = 0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc{} || ptr != end || t.empty()) throw Error("cannot parse " + what + ": '" + t + "'");
  return v;
}

void check_value(double v, std::size_t r, std::size_t c) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream os;
    os << "invalid emission value " << v << " at row " << r << ", col " << c;
    throw Error(os.str());
  }
}

EmissionGrid load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());

  std::map<std::string, std::string> header;
  std::string line;
  std::streampos payload_start = in.tellg();
  // Header lines are key=value; a line may hold several comma-separated pairs.
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) {
      payload_start = in.tellg();
      continue;
    }
    if (t.find('=') == std::string::npos) break;
    std::stringstream ss(t);
    std::string pair;
    while (std::getline(ss, pair, ',')) {
      const auto eq = pair.find('=');
      if (eq == std::string::npos) throw Error("malformed header entry '" + pair + "' in " + path.string());
      header[trim(pair.substr(0, eq))] = trim(pair.substr(eq + 1));
    }
    payload_start = in.tellg();
  }
  for (const char* key : {"compound", "date", "rows", "cols", "lat_res", "lon_res"})
    if (!header.contains(key)) throw Error(std::string("missing header key '") + key + "' in " + path.string());

  EmissionGrid g;
  g.compound = header["compound"];
  g.date = header["date"];
  g.lat_res = parse_double(header["lat_res"], "lat_res");
  g.lon_res = parse_double(header["lon_res"], "lon_res");
  const std::size_t rows = parse_dim(header["rows"], "rows");
  const std::size_t cols = parse_dim(header["cols"], "cols");
  if (rows == 0 || cols == 0) throw Error("grid dims must be positive in " + path.string());

  in.clear();
  in.seekg(payload_start);
  std::vector<double> values;
  values.reserve(rows * cols);
  std::size_t r = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (r >= rows) throw Error("dimension mismatch: more than " + std::to_string(rows) + " payload rows");
    std::stringstream ss(line);
    std::string tok;
    std::size_t c = 0;
    while (std::getline(ss, tok, ',')) {
      if (c >= cols) throw Error("dimension mismatch: row " + std::to_string(r) + " has more than " +
                                 std::to_string(cols) + " values");
      const double v = parse_double(tok, "value at row " + std::to_string(r) + ", col " + std::to_string(c));
      check_value(v, r, c);
      values.push_back(v);
      ++c;
    }
    if (c != cols)
      throw Error("dimension mismatch: row " + std::to_string(r) + " has " + std::to_string(c) + " values, expected " +
                  std::to_string(cols));
    ++r;
  }
  if (r != rows)
    throw Error("dimension mismatch: " + std::to_string(r) + " payload rows, expected " + std::to_string(rows));
  g.values = Map2D(rows, cols, std::move(values));
  g.validate();
  return g;
}

void save_csv(const EmissionGrid& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  out << "compound=" << g.compound << '\n' << "date=" << g.date << '\n';
  out << "rows=" << g.rows() << '\n' << "cols=" << g.cols() << '\n';
  out << "lat_res=" << fmt(g.lat_res) << '\n';
  out << "lon_res=" << fmt(g.lon_res) << '\n';
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c) out << ',';
      out << fmt(g.values(r, c));
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

EmissionGrid load_bgrid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error("not a bgrid file: " + path.string());
  const auto version = binio::get<std::uint8_t>(in);
  if (version != kVersion) throw Error("unsupported bgrid version " + std::to_string(version));
  EmissionGrid g;
  g.compound = binio::get_string(in);
  g.date.resize(kDateLen);
  if (!in.read(g.date.data(), kDateLen)) throw Error("bgrid truncated in date");
  const auto rows = binio::get<std::uint32_t>(in);
  const auto cols = binio::get<std::uint32_t>(in);
  g.lat_res = binio::get<double>(in);
  g.lon_res = binio::get<double>(in);
  if (rows == 0 || cols == 0) throw Error("bgrid dims must be positive");
  std::vector<double> values(std::size_t{rows} * cols);
  binio::get_array(in, values.data(), values.size());
  if (in.peek() != std::char_traits<char>::eof()) throw Error("dimension mismatch: trailing bytes in " + path.string());
  for (std::size_t i = 0; i < values.size(); ++i) check_value(values[i], i / cols, i % cols);
  g.values = Map2D(rows, cols, std::move(values));
  g.validate();
  return g;
}

void save_bgrid(const EmissionGrid& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, 4);
  binio::put<std::uint8_t>(out, kVersion);
  binio::put_string(out, g.compound);
  out.write(g.date.data(), kDateLen);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.rows()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.cols()));
  binio::put<double>(out, g.lat_res);
  binio::put<double>(out, g.lon_res);
  binio::put_array(out, g.values.data(), g.values.size());
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

bool is_iso_date(const std::string& s) {
  if (s.size() != kDateLen || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  const int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

void EmissionGrid::validate() const {
  if (compound.empty()) throw Error("grid has empty compound tag");
  if (!is_iso_date(date)) throw Error("grid date '" + date + "' is not YYYY-MM-DD");
  if (rows() == 0 || cols() == 0) throw Error("grid must have at least one row and column");
  if (!(lat_res > 0.0) || !(lon_res > 0.0) || !std::isfinite(lat_res) || !std::isfinite(lon_res))
    throw Error("grid resolutions must be positive");
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) check_value(values(r, c), r, c);
}

GridFormat parse_grid_format(const std::string& name) {
  if (name == "csv") return GridFormat::csv;
  if (name == "bgrid") return GridFormat::bgrid;
  throw Error("unknown grid format '" + name + "'");
}

GridFormat grid_format_for(const std::filesystem::path& path) {
  return parse_grid_format(path.extension().string().substr(path.has_extension() ? 1 : 0));
}

EmissionGrid load_grid(const std::filesystem::path& path, GridFormat format) {
  if (!std::filesystem::exists(path)) throw Error("no such file: " + path.string());
  return format == GridFormat::csv ? load_csv(path) : load_bgrid(path);
}

void save_grid(const EmissionGrid& grid, const std::filesystem::path& path, GridFormat format) {
  grid.validate();
  if (format == GridFormat::csv)
    save_csv(grid, path);
  else
    save_bgrid(grid, path);
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  Fnv1a h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

}  // namespace mbsr
