#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "cetn/common.hpp"

namespace cetn {

/// Container used by checkpoints and encoded datasets: one line of JSON
/// describing the payload, a newline, then the raw little-endian bytes.
struct BlobFile {
  std::string header_json;
  std::vector<char> payload;
};

void write_blob_file(const std::string& path, const std::string& header_json,
                     const std::vector<char>& payload);
BlobFile read_blob_file(const std::string& path);

/// Append the raw bytes of a trivially copyable range to a payload.
template <typename T>
void append_bytes(std::vector<char>& payload, const T* data, size_t count) {
  static_assert(std::is_trivially_copyable_v<T>);
  const char* p = reinterpret_cast<const char*>(data);
  payload.insert(payload.end(), p, p + count * sizeof(T));
}

template <typename T>
void read_bytes(const std::vector<char>& payload, size_t byte_offset, T* out,
                size_t count) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (byte_offset + count * sizeof(T) > payload.size()) {
    throw IoError("blob payload truncated: need " +
                  std::to_string(byte_offset + count * sizeof(T)) + " bytes, have " +
                  std::to_string(payload.size()));
  }
  std::memcpy(out, payload.data() + byte_offset, count * sizeof(T));
}

}  // namespace cetn
