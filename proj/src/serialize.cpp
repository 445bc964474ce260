#include "cetn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cetn {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

void write_blob_file(const std::string& path, const std::string& header_json,
                     const std::vector<char>& payload) {
  if (header_json.find('\n') != std::string::npos) {
    throw IoError("blob header must be a single line");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << header_json << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write to " + path);
}

BlobFile read_blob_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  BlobFile f;
  if (!std::getline(in, f.header_json)) throw IoError(path + ": missing header line");
  f.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return f;
}

}  // namespace cetn
