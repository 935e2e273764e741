// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "fgvp/backends.hpp"
#include "fgvp/digest.hpp"
#include "fgvp/image_io.hpp"
#include "fgvp/log.hpp"
#include "fgvp/parallel.hpp"

// Must follow Eigen: <resolv.h> defines _res.
#include <httplib.h>

namespace fgvp {

using nlohmann::json;

namespace {

const char* kind_name(RemoteError::Kind k) {
  switch (k) {
    case RemoteError::Kind::Transport:
      return "transport error";
    case RemoteError::Kind::Http:
      return "http error";
    case RemoteError::Kind::Protocol:
      return "protocol error";
  }
  return "error";
}

[[noreturn]] void protocol_error(const std::string& endpoint, const std::string& detail) {
  throw RemoteError(RemoteError::Kind::Protocol, endpoint, 1, detail);
}

json box_array(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

}  // namespace

RemoteError::RemoteError(Kind kind, std::string endpoint, int attempts, const std::string& detail)
    : std::runtime_error(std::string(kind_name(kind)) + " on " + endpoint + " after " + std::to_string(attempts) +
                         " attempt(s): " + detail),
      kind_(kind),
      endpoint_(std::move(endpoint)),
      attempts_(attempts) {}

void RemoteConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("remote batch size must be >= 1");
  if (retries < 0) throw std::invalid_argument("remote retries must be >= 0");
  if (!(timeout_seconds > 0)) throw std::invalid_argument("remote timeout must be positive");
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    throw std::invalid_argument("remote url must start with http:// or https://");
  }
}

RemoteClient::RemoteClient(RemoteConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t scheme_end = config_.base_url.find("://") + 3;
  const std::size_t slash = config_.base_url.find('/', scheme_end);
  scheme_host_port_ = config_.base_url.substr(0, slash);
  if (slash != std::string::npos) {
    path_prefix_ = config_.base_url.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

std::string RemoteClient::request(const std::string& method, const std::string& endpoint,
                                  const std::string& body) const {
  const std::string path = path_prefix_ + endpoint;
  const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  std::string last_error;
  RemoteError::Kind last_kind = RemoteError::Kind::Transport;
  const int max_attempts = config_.retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    httplib::Client cli(scheme_host_port_);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    ++requests_;
    httplib::Result res = method == "GET" ? cli.Get(path) : cli.Post(path, body, "application/json");
    if (!res) {
      last_kind = RemoteError::Kind::Transport;
      last_error = httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      return res->body;
    } else {
      last_kind = RemoteError::Kind::Http;
      last_error = "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      const bool retryable = res->status >= 500 || res->status == 429;
      if (!retryable) throw RemoteError(last_kind, endpoint, attempt, last_error);
    }
    if (attempt < max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(config_.backoff_ms) << (attempt - 1)));
    }
  }
  throw RemoteError(last_kind, endpoint, max_attempts, last_error);
}

std::string RemoteClient::post(const std::string& endpoint, const std::string& body) const {
  return request("POST", endpoint, body);
}

std::string RemoteClient::get(const std::string& endpoint) const { return request("GET", endpoint, {}); }

void RemoteClient::fetch_health() {
  std::lock_guard lock(health_mu_);
  if (health_fetched_) return;
  scorer_tag_ = config_.scorer_tag;
  segmenter_tag_ = config_.segmenter_tag;
  if (scorer_tag_.empty() || segmenter_tag_.empty()) {
    try {
      const json h = json::parse(get("/v1/health"));
      const json& models = h.at("models");
      if (scorer_tag_.empty()) scorer_tag_ = models.value("scorer", "unknown");
      if (segmenter_tag_.empty()) segmenter_tag_ = models.value("segmenter", "unknown");
    } catch (const std::exception& e) {
      warn(std::string("health check failed, using model tag 'unknown': ") + e.what());
      if (scorer_tag_.empty()) scorer_tag_ = "unknown";
      if (segmenter_tag_.empty()) segmenter_tag_ = "unknown";
    }
  }
  health_fetched_ = true;
}

std::string RemoteClient::scorer_tag() {
  fetch_health();
  return scorer_tag_;
}

std::string RemoteClient::segmenter_tag() {
  fetch_health();
  return segmenter_tag_;
}

Embedding parse_embedding_response(const std::string& endpoint, const std::string& body, int expected_dim) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    protocol_error(endpoint, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("embedding") || !j["embedding"].is_array()) {
    protocol_error(endpoint, "missing 'embedding' array");
  }
  const json& arr = j["embedding"];
  if (!j.contains("dim") || !j["dim"].is_number_integer()) protocol_error(endpoint, "missing integer 'dim'");
  const int dim = j["dim"].get<int>();
  if (dim < 1 || static_cast<std::size_t>(dim) != arr.size()) {
    protocol_error(endpoint, "'dim' is " + std::to_string(dim) + " but embedding has " + std::to_string(arr.size()) +
                                 " entries");
  }
  if (expected_dim > 0 && dim != expected_dim) {
    protocol_error(endpoint, "embedding dimension changed from " + std::to_string(expected_dim) + " to " +
                                 std::to_string(dim));
  }
  Embedding e(dim);
  for (int i = 0; i < dim; ++i) {
    if (!arr[i].is_number()) protocol_error(endpoint, "non-numeric embedding entry");
    e[i] = arr[i].get<float>();
  }
  if (!e.allFinite()) protocol_error(endpoint, "non-finite embedding entry");
  const double norm = e.cast<double>().norm();
  if (std::abs(norm - 1.0) > 1e-3) protocol_error(endpoint, "embedding norm " + std::to_string(norm) + " is not 1");
  return e;
}

std::vector<SegmentResult> parse_segment_response(const std::string& endpoint, const std::string& body, int height,
                                                  int width, std::size_t expected) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    protocol_error(endpoint, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("masks") || !j["masks"].is_array()) protocol_error(endpoint, "missing 'masks'");
  const json& masks = j["masks"];
  if (masks.size() != expected) {
    protocol_error(endpoint, "expected " + std::to_string(expected) + " masks, got " + std::to_string(masks.size()));
  }
  std::vector<SegmentResult> out;
  out.reserve(expected);
  for (const json& m : masks) {
    RleMask rle;
    try {
      rle = m.get<RleMask>();
    } catch (const std::exception& e) {
      protocol_error(endpoint, std::string("bad RLE: ") + e.what());
    }
    if (rle.height != height || rle.width != width) protocol_error(endpoint, "mask size does not match the image");
    SegmentResult r;
    try {
      r.mask = rle_decode(rle);
    } catch (const std::exception& e) {
      protocol_error(endpoint, std::string("bad RLE: ") + e.what());
    }
    r.quality = m.contains("quality") && m["quality"].is_number() ? m["quality"].get<double>() : 0.0;
    out.push_back(std::move(r));
  }
  return out;
}

RemoteScorer::RemoteScorer(std::shared_ptr<RemoteClient> client, std::shared_ptr<DiskCache> cache, int expected_dim)
    : client_(std::move(client)), cache_(std::move(cache)), dim_(expected_dim) {}

int RemoteScorer::dim() const {
  const int d = dim_.load();
  if (d <= 0) throw std::logic_error("remote scorer dimension is unknown before the first embedding call");
  return d;
}

Embedding RemoteScorer::call(const std::string& endpoint, const std::string& body) {
  std::string key;
  if (cache_ && cache_->enabled()) {
    key = DiskCache::make_key(endpoint, client_->scorer_tag(), body);
    if (auto hit = cache_->get(key)) {
      try {
        Embedding e = parse_embedding_response(endpoint, *hit, dim_.load());
        dim_.store(static_cast<int>(e.size()));
        return e;
      } catch (const RemoteError&) {
        warn("cached response failed validation; refetching");
      }
    }
  }
  const std::string response = client_->post(endpoint, body);
  Embedding e = parse_embedding_response(endpoint, response, dim_.load());
  dim_.store(static_cast<int>(e.size()));
  if (!key.empty()) cache_->put(key, response);
  return e;
}

Embedding RemoteScorer::embed_image(const ImageBuffer& img) {
  const json body = {{"image_png_b64", base64_encode(encode_png(img))}};
  return call("/v1/embed_image", body.dump());
}

Embedding RemoteScorer::embed_text(const std::string& text) {
  const json body = {{"text", text}};
  return call("/v1/embed_text", body.dump());
}

std::vector<Embedding> RemoteScorer::embed_images(std::span<const ImageBuffer> imgs) {
  std::vector<Embedding> out(imgs.size());
  parallel_for(imgs.size(), client_->config().batch_size, [&](std::size_t i) { out[i] = embed_image(imgs[i]); });
  return out;
}

std::vector<Embedding> RemoteScorer::embed_texts(std::span<const std::string> texts) {
  std::vector<Embedding> out(texts.size());
  parallel_for(texts.size(), client_->config().batch_size, [&](std::size_t i) { out[i] = embed_text(texts[i]); });
  return out;
}

RemoteSegmenter::RemoteSegmenter(std::shared_ptr<RemoteClient> client, std::shared_ptr<DiskCache> cache)
    : client_(std::move(client)), cache_(std::move(cache)) {}

std::vector<SegmentResult> RemoteSegmenter::call(const ImageBuffer& img, const std::string& body,
                                                 std::size_t expected) {
  static const std::string kEndpoint = "/v1/segment";
  std::string key;
  if (cache_ && cache_->enabled()) {
    key = DiskCache::make_key(kEndpoint, client_->segmenter_tag(), body);
    if (auto hit = cache_->get(key)) {
      try {
        return parse_segment_response(kEndpoint, *hit, img.height(), img.width(), expected);
      } catch (const RemoteError&) {
        warn("cached response failed validation; refetching");
      }
    }
  }
  const std::string response = client_->post(kEndpoint, body);
  auto out = parse_segment_response(kEndpoint, response, img.height(), img.width(), expected);
  if (!key.empty()) cache_->put(key, response);
  return out;
}

std::vector<SegmentResult> RemoteSegmenter::segment_boxes(const ImageBuffer& img, std::span<const Box> boxes) {
  json arr = json::array();
  for (const auto& b : boxes) arr.push_back(box_array(b));
  const json body = {{"image_png_b64", base64_encode(encode_png(img))}, {"boxes", arr}};
  return call(img, body.dump(), boxes.size());
}

std::vector<SegmentResult> RemoteSegmenter::segment_points(const ImageBuffer& img, std::span<const Point> points) {
  json arr = json::array();
  for (const auto& p : points) arr.push_back(json::array({p.x, p.y}));
  const json body = {{"image_png_b64", base64_encode(encode_png(img))}, {"points", arr}};
  return call(img, body.dump(), points.size());
}

}  // namespace fgvp
