#include "tutor/assets.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "tutor/error.hpp"

#ifndef TUTOR_DEFAULT_ASSET_DIR
#define TUTOR_DEFAULT_ASSET_DIR "assets"
#endif

namespace tutor {

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("TUTOR_ASSET_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return TUTOR_DEFAULT_ASSET_DIR;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::AssetError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  static std::atomic<unsigned long> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::AssetError, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::AssetError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tutor
