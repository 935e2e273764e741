// SPDX-License-Identifier: Apache-2.0
//
// Concrete scorer/segmenter backends: a deterministic in-process fixture, an
// HTTP client for a model server, and a content-addressed disk cache.
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgvp/proposals.hpp"
#include "fgvp/scoring.hpp"

namespace fgvp {

// ---------------------------------------------------------------------------
// Fixture

struct FixtureSpec {
  std::uint64_t seed = 0;
  int dim = 512;
  /// hex SHA-256 of the input bytes -> programmed unit vector.
  std::map<std::string, Embedding> programmed;
};

/// Programmed vector when the content hash matches, else a seeded
/// pseudo-random unit vector derived from the hash.
Embedding fixture_embed(std::span<const std::uint8_t> bytes, const FixtureSpec& spec);

/// Byte strings the fixture scorer hashes for images and texts.
std::vector<std::uint8_t> fixture_image_bytes(const ImageBuffer& img);
std::vector<std::uint8_t> fixture_text_bytes(const std::string& text);

class FixtureScorer final : public ScorerBackend {
 public:
  explicit FixtureScorer(FixtureSpec spec = {});

  int dim() const override { return spec_.dim; }
  Embedding embed_image(const ImageBuffer& img) override;
  Embedding embed_text(const std::string& text) override;

  /// Programs the vector returned for this exact input. The vector is
  /// normalized to unit length.
  void program_image(const ImageBuffer& img, const Embedding& v);
  void program_text(const std::string& text, const Embedding& v);

  std::size_t calls() const { return calls_.load(); }

 private:
  FixtureSpec spec_;
  std::atomic<std::size_t> calls_{0};
};

/// Box queries return the rasterized box; point queries return the
/// 4-connected region of pixels within `tolerance` (per channel) of the
/// seed pixel's color. Quality is 1 for every mask.
class FixtureSegmenter final : public SegmenterBackend {
 public:
  explicit FixtureSegmenter(int tolerance = 24) : tolerance_(tolerance) {}
  SegmenterCapabilities capabilities() const override { return {true, true}; }
  std::vector<SegmentResult> segment_boxes(const ImageBuffer& img, std::span<const Box> boxes) override;
  std::vector<SegmentResult> segment_points(const ImageBuffer& img, std::span<const Point> points) override;

 private:
  int tolerance_;
};

/// Region grown from a seed pixel under an L-infinity color tolerance.
BinaryMask flood_region(const ImageBuffer& img, int seed_y, int seed_x, int tolerance);

// ---------------------------------------------------------------------------
// Disk cache

struct CacheStats {
  std::size_t entries = 0;
  std::uintmax_t bytes = 0;
};

/// Content-addressed store. Entries carry a checksum; corrupt entries read
/// as misses. Writes go to a temp file then rename, so concurrent writers
/// (threads or processes) always leave a valid entry. If the directory is
/// not writable the cache disables itself with a warning.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir);

  bool enabled() const { return enabled_.load(); }
  const std::filesystem::path& dir() const { return dir_; }

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view value);

  CacheStats stats() const;
  std::size_t clear();

  std::filesystem::path entry_path(const std::string& key) const;

  /// Key from (endpoint, model tag, request body).
  static std::string make_key(std::string_view endpoint, std::string_view model_tag, std::string_view body);

 private:
  void disable(const std::string& why);

  std::filesystem::path dir_;
  std::atomic<bool> enabled_{true};
};

/// Cache directory from FGVP_CACHE_DIR, else ~/.cache/fgvp, else ./.fgvp-cache.
std::filesystem::path default_cache_dir();

// ---------------------------------------------------------------------------
// Remote

struct RemoteConfig {
  std::string base_url = "http://127.0.0.1:8000";
  double timeout_seconds = 60.0;
  int retries = 3;
  int batch_size = 8;
  int backoff_ms = 100;
  /// Model tags used in cache keys. Empty: ask the server's health endpoint.
  std::string scorer_tag;
  std::string segmenter_tag;

  void validate() const;
};

class RemoteError : public std::runtime_error {
 public:
  enum class Kind { Transport, Http, Protocol };
  RemoteError(Kind kind, std::string endpoint, int attempts, const std::string& detail);

  Kind kind() const { return kind_; }
  const std::string& endpoint() const { return endpoint_; }
  int attempts() const { return attempts_; }

 private:
  Kind kind_;
  std::string endpoint_;
  int attempts_;
};

/// JSON-over-HTTP transport with retries and exponential backoff.
class RemoteClient {
 public:
  explicit RemoteClient(RemoteConfig config);

  const RemoteConfig& config() const { return config_; }

  /// POSTs body, returns the response body. Retries transport failures and
  /// 5xx/429 responses.
  std::string post(const std::string& endpoint, const std::string& body) const;
  std::string get(const std::string& endpoint) const;

  /// Model tags from /v1/health (fetched once).
  std::string scorer_tag();
  std::string segmenter_tag();

  std::size_t requests_sent() const { return requests_.load(); }

 private:
  std::string request(const std::string& method, const std::string& endpoint, const std::string& body) const;
  void fetch_health();

  RemoteConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  mutable std::atomic<std::size_t> requests_{0};
  std::mutex health_mu_;
  bool health_fetched_ = false;
  std::string scorer_tag_;
  std::string segmenter_tag_;
};

class RemoteScorer final : public ScorerBackend {
 public:
  RemoteScorer(std::shared_ptr<RemoteClient> client, std::shared_ptr<DiskCache> cache = nullptr, int expected_dim = 0);

  int dim() const override;
  Embedding embed_image(const ImageBuffer& img) override;
  Embedding embed_text(const std::string& text) override;
  std::vector<Embedding> embed_images(std::span<const ImageBuffer> imgs) override;
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) override;

 private:
  Embedding call(const std::string& endpoint, const std::string& body);

  std::shared_ptr<RemoteClient> client_;
  std::shared_ptr<DiskCache> cache_;
  std::atomic<int> dim_;
};

class RemoteSegmenter final : public SegmenterBackend {
 public:
  explicit RemoteSegmenter(std::shared_ptr<RemoteClient> client, std::shared_ptr<DiskCache> cache = nullptr);

  SegmenterCapabilities capabilities() const override { return {true, true}; }
  std::vector<SegmentResult> segment_boxes(const ImageBuffer& img, std::span<const Box> boxes) override;
  std::vector<SegmentResult> segment_points(const ImageBuffer& img, std::span<const Point> points) override;

 private:
  std::vector<SegmentResult> call(const ImageBuffer& img, const std::string& body, std::size_t expected);

  std::shared_ptr<RemoteClient> client_;
  std::shared_ptr<DiskCache> cache_;
};

/// Validates an embedding response body; throws RemoteError(Protocol).
Embedding parse_embedding_response(const std::string& endpoint, const std::string& body, int expected_dim);
/// Validates a segmentation response body; throws RemoteError(Protocol).
std::vector<SegmentResult> parse_segment_response(const std::string& endpoint, const std::string& body, int height,
                                                  int width, std::size_t expected);

}  // namespace fgvp
