#include "tcssl/io_util.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcssl/common.hpp"

namespace fs = std::filesystem;

namespace tcssl {

void write_file_atomic(const std::string& path, const void* data, std::size_t size) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw DataError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

void read_file_exact(const std::string& path, void* out, std::size_t size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  in.seekg(0, std::ios::end);
  const auto actual = static_cast<std::size_t>(in.tellg());
  if (actual != size) {
    throw DataError("'" + path + "': expected " + std::to_string(size) + " bytes, found " +
                    std::to_string(actual));
  }
  in.seekg(0);
  in.read(static_cast<char*>(out), static_cast<std::streamsize>(size));
  if (!in) throw DataError("short read from '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tcssl
