// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "fgvp/backends.hpp"
#include "fgvp/digest.hpp"
#include "fgvp/log.hpp"

namespace fgvp {

namespace fs = std::filesystem;

namespace {

// Entry layout: magic(8) | created_at(8, LE) | length(8, LE) | sha256(32) | payload
constexpr char kMagic[8] = {'F', 'G', 'V', 'P', 'C', 'E', '0', '1'};
constexpr std::size_t kHeaderSize = 8 + 8 + 8 + 32;
constexpr std::string_view kSuffix = ".entry";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(in[at + i])} << (8 * i);
  return v;
}

bool is_entry(const fs::directory_entry& e) {
  const std::string name = e.path().filename().string();
  return e.is_regular_file() && name.size() > kSuffix.size() && name.ends_with(kSuffix);
}

}  // namespace

DiskCache::DiskCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    disable("cannot create cache directory " + dir_.string());
    return;
  }
  // Probe writability once up front.
  const fs::path probe = dir_ / (".probe." + std::to_string(::getpid()));
  {
    std::ofstream out(probe, std::ios::binary);
    if (!out || !(out << 'x')) {
      disable("cache directory is not writable: " + dir_.string());
      return;
    }
  }
  fs::remove(probe, ec);
}

void DiskCache::disable(const std::string& why) {
  if (enabled_.exchange(false)) warn(why + "; caching disabled");
}

std::string DiskCache::make_key(std::string_view endpoint, std::string_view model_tag, std::string_view body) {
  std::string buf;
  buf.reserve(endpoint.size() + model_tag.size() + body.size() + 2);
  buf.append(endpoint).push_back('\n');
  buf.append(model_tag).push_back('\n');
  buf.append(body);
  return to_hex(sha256(buf));
}

fs::path DiskCache::entry_path(const std::string& key) const {
  const std::string shard = key.size() >= 2 ? key.substr(0, 2) : std::string("00");
  return dir_ / shard / (key + std::string(kSuffix));
}

std::optional<std::string> DiskCache::get(const std::string& key) const {
  if (!enabled()) return std::nullopt;
  const fs::path p = entry_path(key);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string raw = ss.str();
  if (raw.size() < kHeaderSize || std::memcmp(raw.data(), kMagic, 8) != 0) {
    warn("corrupt cache entry (bad header): " + p.string());
    return std::nullopt;
  }
  const std::uint64_t length = get_u64(raw, 16);
  if (raw.size() != kHeaderSize + length) {
    warn("corrupt cache entry (truncated): " + p.string());
    return std::nullopt;
  }
  std::string payload = raw.substr(kHeaderSize);
  const Sha256 sum = sha256(payload);
  if (std::memcmp(sum.data(), raw.data() + 24, 32) != 0) {
    warn("corrupt cache entry (checksum mismatch): " + p.string());
    return std::nullopt;
  }
  return payload;
}

void DiskCache::put(const std::string& key, std::string_view value) {
  if (!enabled()) return;
  const fs::path p = entry_path(key);
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) {
    disable("cannot create cache shard " + p.parent_path().string());
    return;
  }
  std::string blob(kMagic, 8);
  const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  put_u64(blob, static_cast<std::uint64_t>(now));
  put_u64(blob, value.size());
  const Sha256 sum = sha256(value);
  blob.append(reinterpret_cast<const char*>(sum.data()), sum.size());
  blob.append(value);

  std::ostringstream tmp_name;
  tmp_name << p.filename().string() << ".tmp." << ::getpid() << '.' << std::this_thread::get_id();
  const fs::path tmp = p.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) {
      fs::remove(tmp, ec);
      disable("cannot write cache entry " + p.string());
      return;
    }
  }
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    disable("cannot publish cache entry " + p.string());
  }
}

CacheStats DiskCache::stats() const {
  CacheStats s;
  std::error_code ec;
  if (!fs::is_directory(dir_, ec)) return s;
  for (const auto& e : fs::recursive_directory_iterator(dir_, ec)) {
    if (!is_entry(e)) continue;
    ++s.entries;
    s.bytes += e.file_size(ec);
  }
  return s;
}

std::size_t DiskCache::clear() {
  std::size_t removed = 0;
  std::error_code ec;
  if (!fs::is_directory(dir_, ec)) return 0;
  std::vector<fs::path> victims;
  for (const auto& e : fs::recursive_directory_iterator(dir_, ec)) {
    if (is_entry(e)) victims.push_back(e.path());
  }
  for (const auto& p : victims) removed += fs::remove(p, ec) ? 1 : 0;
  return removed;
}

fs::path default_cache_dir() {
  if (const char* env = std::getenv("FGVP_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    return fs::path(home) / ".cache" / "fgvp";
  }
  return ".fgvp-cache";
}

}  // namespace fgvp
