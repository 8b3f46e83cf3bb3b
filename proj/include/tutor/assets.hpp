#pragma once

#include <filesystem>
#include <string>

namespace tutor {

/// Directory holding the bundled text assets. `TUTOR_ASSET_DIR` in the
/// environment overrides the build-time location.
std::filesystem::path asset_dir();

/// Whole-file read; throws Error(AssetError) when the file cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace tutor
