#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace carl {

/// Writes to a sibling temp file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// FNV-1a over the bytes of a file, hex-encoded. Used for checkpoint identity checks.
std::string file_digest(const std::filesystem::path& path);

}  // namespace carl
