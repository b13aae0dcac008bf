#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bitalloc/models.hpp"

namespace bitalloc {

// CSV with header `qp_g,qp_c,r_g_kbpmp,r_c_kbpmp,d_g,d_c`.
inline constexpr const char* kProbeLogHeader = "qp_g,qp_c,r_g_kbpmp,r_c_kbpmp,d_g,d_c";

std::vector<ProbeRecord> read_probe_log(std::istream& in);
std::vector<ProbeRecord> read_probe_log(const std::filesystem::path& path);

// Shortest representation that parses back to the same double.
std::string format_number(double v);

void write_probe_log_header(std::ostream& out);
void append_probe_record(std::ostream& out, const ProbeRecord& record);
void write_probe_log(const std::filesystem::path& path, const std::vector<ProbeRecord>& records);

}  // namespace bitalloc
