#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace garment {

// Writes through a sibling temp file and renames it over `path`, so readers
// never observe a partially written output. Parent directories are created.
void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                      bool binary = false);

std::string read_text_file(const std::filesystem::path& path);

// Hex digest (FNV-1a 64) of a file's bytes; used for determinism checks.
std::string file_digest(const std::filesystem::path& path);

}  // namespace garment
