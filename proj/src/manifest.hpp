#pragma once

// Run manifests: sorted key = value text recording how outputs were made.
// No timestamps, so identical runs give identical manifests.

#include <filesystem>
#include <string>
#include <string_view>

#include "vjspoof/kvconfig.hpp"

namespace vjspoof::cli {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

class Manifest {
 public:
  explicit Manifest(const std::string& subcommand);

  void set(const std::string& key, const std::string& value) { kv_.set(key, value); }
  void set_number(const std::string& key, double value) { kv_.set(key, value); }
  /// Copies every resolved setting under "config.".
  void add_config(const KeyValues& resolved);
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  const KeyValues& values() const noexcept { return kv_; }
  void write(const std::filesystem::path& dir) const;

 private:
  KeyValues kv_;
};

}  // namespace vjspoof::cli
