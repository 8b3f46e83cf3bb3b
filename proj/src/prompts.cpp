#include "tutor/prompts.hpp"

#include "tutor/assets.hpp"
#include "tutor/digest.hpp"
#include "tutor/error.hpp"
#include "tutor/grammar.hpp"

namespace tutor {

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && (i == 0 || tmpl[i - 1] != '$')) {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

PromptAssets PromptAssets::load(const std::filesystem::path& dir) {
  PromptAssets assets;
  const std::string manifest = read_text_file(dir / "MANIFEST");
  std::size_t pos = 0;
  while (pos < manifest.size()) {
    std::size_t nl = manifest.find('\n', pos);
    if (nl == std::string::npos) nl = manifest.size();
    const std::string line = trim(std::string_view(manifest).substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_whitespace(line);
    if (fields.size() != 3) throw Error(ErrorCode::AssetError, "bad manifest line: " + line);
    Entry e{read_text_file(dir / fields[1]), fields[2]};
    if (sha256_hex(e.text) != e.sha256) {
      throw Error(ErrorCode::AssetError, "checksum mismatch for " + fields[1]);
    }
    assets.entries_.emplace(fields[0], std::move(e));
  }
  return assets;
}

const PromptAssets& PromptAssets::bundled() {
  static const PromptAssets assets = load(asset_dir() / "prompts");
  return assets;
}

const std::string& PromptAssets::text(std::string_view stage) const {
  const auto it = entries_.find(stage);
  if (it == entries_.end()) throw Error(ErrorCode::AssetError, "no prompt for " + std::string(stage));
  return it->second.text;
}

const std::string& PromptAssets::checksum(std::string_view stage) const {
  const auto it = entries_.find(stage);
  if (it == entries_.end()) throw Error(ErrorCode::AssetError, "no prompt for " + std::string(stage));
  return it->second.sha256;
}

std::vector<std::string> PromptAssets::stages() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

}  // namespace tutor
