#pragma once

#include <cstddef>
#include <string>

namespace tcssl {

/// Writes via a temp file in the same directory and renames into place, so
/// readers never observe a partial file.
void write_file_atomic(const std::string& path, const void* data, std::size_t size);

/// Reads exactly `size` bytes; throws DataError on missing file or size mismatch.
void read_file_exact(const std::string& path, void* out, std::size_t size);

/// Reads a whole file into a string; throws DataError when missing.
std::string read_file(const std::string& path);

}  // namespace tcssl
