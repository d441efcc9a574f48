#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <sstream>

#include "vjspoof/error.hpp"

#ifndef VJSPOOF_VERSION
#define VJSPOOF_VERSION "0.0.0"
#endif

namespace vjspoof::cli {

namespace {

struct MdCtxFree {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error(Errc::io_error, "sha256 init failed");
    }
  }
  void update(const char* p, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), p, n) != 1) throw Error(Errc::io_error, "sha256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error(Errc::io_error, "sha256 final failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdCtxFree> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::file_not_found, path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

Manifest::Manifest(const std::string& subcommand) {
  kv_.set("subcommand", subcommand);
  kv_.set("tool_version", std::string("vjspoof ") + VJSPOOF_VERSION);
}

void Manifest::add_config(const KeyValues& resolved) {
  for (const auto& [k, v] : resolved.entries()) kv_.set("config." + k, v);
}

void Manifest::add_input(const std::string& role, const std::filesystem::path& path) {
  kv_.set("input." + role, path.filename().string());
  kv_.set("input." + role + ".sha256", sha256_file(path));
}

void Manifest::add_output(const std::filesystem::path& path) {
  kv_.set("output." + path.filename().string() + ".sha256", sha256_file(path));
}

void Manifest::write(const std::filesystem::path& dir) const { kv_.save(dir / "manifest.txt"); }

}  // namespace vjspoof::cli
