#include "bitalloc/probe_log.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "bitalloc/error.hpp"

namespace bitalloc {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(std::move(field));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_field(const std::string& field, std::size_t line_no, const char* name) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "probe log line " + std::to_string(line_no) + ": bad " + name + " '" + field + "'");
  }
  return value;
}

}  // namespace

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::vector<ProbeRecord> read_probe_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kInvalidArgument, "probe log is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kProbeLogHeader) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("probe log header must be '") + kProbeLogHeader + "', got '" + line + "'");
  }
  std::vector<ProbeRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    const auto f = split_csv(line);
    if (f.size() != 6) {
      throw Error(ErrorCode::kInvalidArgument, "probe log line " + std::to_string(line_no) + ": expected 6 fields");
    }
    ProbeRecord r;
    r.qp.qp_g = parse_field<int>(f[0], line_no, "qp_g");
    r.qp.qp_c = parse_field<int>(f[1], line_no, "qp_c");
    r.r_g = parse_field<double>(f[2], line_no, "r_g_kbpmp");
    r.r_c = parse_field<double>(f[3], line_no, "r_c_kbpmp");
    r.d_g = parse_field<double>(f[4], line_no, "d_g");
    r.d_c = parse_field<double>(f[5], line_no, "d_c");
    if (r.qp.qp_g < 0 || r.qp.qp_c < 0) {
      throw Error(ErrorCode::kInvalidArgument, "probe log line " + std::to_string(line_no) + ": negative QP");
    }
    records.push_back(r);
  }
  return records;
}

std::vector<ProbeRecord> read_probe_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open probe log '" + path.string() + "'");
  return read_probe_log(in);
}

void write_probe_log_header(std::ostream& out) { out << kProbeLogHeader << '\n'; }

void append_probe_record(std::ostream& out, const ProbeRecord& r) {
  out << r.qp.qp_g << ',' << r.qp.qp_c << ',' << format_number(r.r_g) << ',' << format_number(r.r_c) << ','
      << format_number(r.d_g) << ',' << format_number(r.d_c) << '\n';
}

void write_probe_log(const std::filesystem::path& path, const std::vector<ProbeRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write probe log '" + path.string() + "'");
  write_probe_log_header(out);
  for (const ProbeRecord& r : records) append_probe_record(out, r);
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

}  // namespace bitalloc
