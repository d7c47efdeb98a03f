#pragma once

#include <filesystem>
#include <string>

namespace coevo {

// Writes content to path via a temp file + rename so readers never observe a
// partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace coevo
