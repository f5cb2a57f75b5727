#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace seedmix {

std::string read_text_file(const std::filesystem::path& path);

// Writes `contents` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace seedmix
