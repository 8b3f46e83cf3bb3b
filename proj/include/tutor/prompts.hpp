#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tutor {

/// Replaces `{name}` placeholders. A brace preceded by `$` is literal, so the
/// `${convo}` field descriptions inside the DSPy-format prompts survive.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values);

/// Text prompts listed in a MANIFEST file (`stage<TAB>file<TAB>sha256` lines).
/// Loading verifies every checksum.
class PromptAssets {
 public:
  /// Throws Error(AssetError) on a missing file or checksum mismatch.
  static PromptAssets load(const std::filesystem::path& dir);
  static const PromptAssets& bundled();  // assets/prompts

  const std::string& text(std::string_view stage) const;
  const std::string& checksum(std::string_view stage) const;
  std::vector<std::string> stages() const;

 private:
  struct Entry {
    std::string text;
    std::string sha256;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace tutor
