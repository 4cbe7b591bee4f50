#pragma once

#include <string>
#include <vector>

#include "resp/common.hpp"

namespace resp::io {

// Dataset container. Text form: one header line
//   respdata,<version>,<n_t>,<classes>,<text|binary>
// then one record per sample: source_id,label,<6*n_t float fields> with
// full-precision floats so write->read is lossless. The binary form keeps the
// same header line, then per record: u32 source length, source bytes,
// i32 label, 6*n_t little-endian float64.
void write_dataset(const std::string& path, const LabeledDataset& dataset, bool binary = false);
LabeledDataset read_dataset(const std::string& path);

// Series CSV with a "t,position" header.
void write_series_csv(const std::string& path, const std::vector<double>& values,
                      double sample_rate);
std::vector<double> read_series_csv(const std::string& path, double* sample_rate_out = nullptr);

// Marker CSV with a "t,x,y,z" header.
void write_marker_csv(const std::string& path, const Marker3DSeries& series);
Marker3DSeries read_marker_csv(const std::string& path);

// FNV-1a 64 content hash, hex encoded; used for artifact manifests.
std::string file_hash_hex(const std::string& path);

// Atomic write: content goes to a temp file that is renamed into place.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace resp::io
