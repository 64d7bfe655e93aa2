#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spx/manifest.hpp"
#include "spx/model.hpp"
#include "spx/room.hpp"
#include "spx/stft.hpp"
#include "spx/trainer.hpp"

namespace spx::cli {

struct KeyInfo {
  const char* key;
  const char* default_value;
  const char* help;
};

const std::vector<KeyInfo>& known_keys();

/// Flat dotted key/value configuration. Defaults < config file < --set.
/// Unknown keys and unparsable values raise kConfig.
class Settings {
 public:
  Settings();

  /// "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  /// "key=value".
  void apply(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  long integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Every key, sorted, one "key = value" per line.
  std::string dump() const;

  StftConfig stft() const;
  ModelConfig model() const;
  TrainConfig train() const;
  SceneRanges scene() const;
  RirOptions rir() const;
  ManifestHeader manifest_header() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string keys_help();

}  // namespace spx::cli
