// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bfgrad::io {

namespace {

void append_le_double(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  for (int byte = 0; byte < 8; ++byte) out.push_back(static_cast<char>((bits >> (8 * byte)) & 0xff));
}

}  // namespace

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void dump_tensor(const std::string& bin_path, const std::string& json_path,
                 const ComplexTensor& tensor) {
  std::string payload;
  payload.reserve(tensor.size() * 16);
  for (const cdouble& value : tensor.data()) {
    append_le_double(payload, value.real());
    append_le_double(payload, value.imag());
  }
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw std::runtime_error("dump_tensor: cannot open " + bin_path);
  bin.write(payload.data(), static_cast<std::streamsize>(payload.size()));

  nlohmann::json sidecar;
  sidecar["shape"] = tensor.shape();
  sidecar["dtype"] = "complex128";
  sidecar["order"] = "row-major";
  sidecar["byte_order"] = "little-endian";
  write_text(json_path, sidecar.dump(2) + "\n");
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "iter,J,snr_in_db,snr_out_db,ms\n";
  for (const MetricsRow& row : rows) {
    out += std::to_string(row.iter);
    out += ',';
    out += format_double(row.j);
    out += ',';
    out += format_double(row.snr_in_db);
    out += ',';
    out += format_double(row.snr_out_db);
    out += ',';
    out += format_double(row.ms);
    out += '\n';
  }
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("write_text: cannot open " + path);
  file.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace bfgrad::io
