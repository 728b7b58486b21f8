#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace relsem {

/// Hex SHA-1 of "blob <size>\0" + bytes, the id git gives the same content.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes `bytes` to `path` via a temporary sibling and a rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace relsem
