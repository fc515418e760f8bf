// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "bfgrad/tensor.hpp"

namespace bfgrad::io {

struct MetricsRow {
  std::size_t iter = 0;
  double j = 0.0;
  double snr_in_db = 0.0;
  double snr_out_db = 0.0;
  double ms = 0.0;
};

// Raw little-endian float64 (re, im) pairs plus a JSON sidecar describing
// shape, dtype and element order.
void dump_tensor(const std::string& bin_path, const std::string& json_path,
                 const ComplexTensor& tensor);

// header: iter,J,snr_in_db,snr_out_db,ms
std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_text(const std::string& path, const std::string& content);

// Deterministic shortest round-trip double formatting.
std::string format_double(double v);

}  // namespace bfgrad::io
