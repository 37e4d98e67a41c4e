#include "digame/history_io.hpp"

#include "digame/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace digame {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string history_to_csv(const History& history) {
  history.validate();
  const int m = history.state_dim();
  const int d = history.control_dim();
  std::string out = "t";
  for (int i = 0; i < m; ++i) out += ",phi_" + std::to_string(i);
  for (int i = 0; i < d; ++i) out += ",u_" + std::to_string(i);
  for (int i = 0; i < d; ++i) out += ",uo_" + std::to_string(i);
  out += '\n';
  for (long k = 0; k < history.size(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    out += format_double(history.grid.time(k));
    for (int i = 0; i < m; ++i) out += ',' + format_double(history.phi[idx](i));
    for (int i = 0; i < d; ++i) out += ',' + format_double(history.u_realized[idx](i));
    for (int i = 0; i < d; ++i) out += ',' + format_double(history.u_intended[idx](i));
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    out.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, long line) {
  double x = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(x)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": bad number '" + std::string(cell) + "'",
                line);
  }
  return x;
}

// Recovers (t_start, h) such that t_start + k*h reproduces every stored time
// exactly, searching a few ulps around the first difference.
TimeGrid recover_grid(const std::vector<double>& t) {
  const long n = static_cast<long>(t.size());
  const auto reproduces = [&](double h) {
    for (long k = 0; k < n; ++k) {
      if (t[static_cast<std::size_t>(k)] != t[0] + static_cast<double>(k) * h) return false;
    }
    return true;
  };
  const double guess = t[1] - t[0];
  if (!(guess > 0.0)) throw Error(ErrorCode::ParseError, "time column must be strictly increasing", 3);
  double lo = guess;
  double hi = guess;
  for (int ulp = 0; ulp <= 64; ++ulp) {
    if (reproduces(hi)) return TimeGrid(t[0], hi, n);
    if (reproduces(lo)) return TimeGrid(t[0], lo, n);
    hi = std::nextafter(hi, INFINITY);
    lo = std::nextafter(lo, 0.0);
  }
  for (long k = 0; k < n; ++k) {
    if (std::abs(t[static_cast<std::size_t>(k)] - (t[0] + static_cast<double>(k) * guess)) > 1e-9 * guess) {
      throw Error(ErrorCode::ParseError, "time column is not uniformly spaced", k + 2);
    }
  }
  return TimeGrid(t[0], (t[static_cast<std::size_t>(n - 1)] - t[0]) / static_cast<double>(n - 1), n);
}

}  // namespace

History history_from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::ParseError, "line 1: missing header", 1);

  const auto header = split_commas(lines[0]);
  if (header.empty() || header[0] != "t") throw Error(ErrorCode::ParseError, "line 1: header must start with 't'", 1);
  std::size_t col = 1;
  const auto count_prefix = [&](const std::string& prefix) {
    int n = 0;
    while (col < header.size() && header[col] == prefix + std::to_string(n)) {
      ++n;
      ++col;
    }
    return n;
  };
  const int m = count_prefix("phi_");
  const int d = count_prefix("u_");
  const int d_o = count_prefix("uo_");
  if (m < 1 || d < 1 || d_o != d || col != header.size()) {
    throw Error(ErrorCode::ParseError, "line 1: header must be t,phi_0..,u_0..,uo_0.. with matching u/uo counts", 1);
  }
  const std::size_t columns = 1 + static_cast<std::size_t>(m + 2 * d);

  History h;
  std::vector<double> times;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const long line_no = static_cast<long>(i + 1);
    const auto cells = split_commas(lines[i]);
    if (cells.size() != columns) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " columns, got " +
                      std::to_string(cells.size()),
                  line_no);
    }
    times.push_back(parse_cell(cells[0], line_no));
    Vec phi(m), u(d), uo(d);
    for (int j = 0; j < m; ++j) phi(j) = parse_cell(cells[static_cast<std::size_t>(1 + j)], line_no);
    for (int j = 0; j < d; ++j) u(j) = parse_cell(cells[static_cast<std::size_t>(1 + m + j)], line_no);
    for (int j = 0; j < d; ++j) uo(j) = parse_cell(cells[static_cast<std::size_t>(1 + m + d + j)], line_no);
    h.phi.push_back(std::move(phi));
    h.u_realized.push_back(std::move(u));
    h.u_intended.push_back(std::move(uo));
  }
  if (times.size() < 2) throw Error(ErrorCode::ParseError, "history needs at least two rows", 2);
  h.grid = recover_grid(times);
  return h;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_history(const History& history, const std::filesystem::path& path) {
  write_file_atomic(path, history_to_csv(history));
}

History load_history(const std::filesystem::path& path) { return history_from_csv(read_file(path)); }

}  // namespace digame
