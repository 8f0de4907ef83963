#include "sure/util.hpp"

#include <openssl/sha.h>

#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "sure/error.hpp"

namespace sure {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("IoError", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {
std::mutex g_warn_mutex;
WarningSink& sink_slot() {
  static WarningSink sink = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
  return sink;
}
}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_warn_mutex);
  auto prev = std::move(sink_slot());
  sink_slot() = std::move(sink);
  return prev;
}

void warn(const std::string& message) {
  std::lock_guard lock(g_warn_mutex);
  if (sink_slot()) sink_slot()(message);
}

}  // namespace sure
