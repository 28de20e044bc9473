#pragma once

// Attribute-oriented description generation: the multi-turn chat protocol that
// asks a vision-language model for a sticker's content, style, role and action,
// the clients that answer it, a JSON-Lines description cache, and the text
// encoder that turns the four descriptions into vectors.

#include "sticker/autograd.hpp"
#include "sticker/data.hpp"
#include "sticker/nn.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticker::adg {

struct ChatTurn {
  std::string role;  // "system" or "user" (the prompt side); "assistant" for replies
  std::string text;
};

/// System turn followed by the three instruction turns. Sticker-independent:
/// the image travels with the request, not in the text.
std::vector<ChatTurn> build_prompt_turns(const StickerImage& sticker);

/// Stable SHA-256 over the role/text sequence.
std::string prompt_hash(const std::vector<ChatTurn>& turns);

struct ChatRequest {
  const StickerImage* sticker = nullptr;
  std::vector<ChatTurn> messages;  // full history, ending with the newest user turn
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DescribeError : public std::runtime_error {
 public:
  DescribeError(std::string id, const std::string& what)
      : std::runtime_error("describing " + id + " failed: " + what), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant reply; throws TransportError on delivery failure.
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string model_name() const = 0;
};

/// Answers from sticker metadata with labelled lines. No network.
class StubChatClient : public ChatClient {
 public:
  std::string complete(const ChatRequest& request) override;
  std::string model_name() const override { return "stub-template-v1"; }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::atomic<std::size_t> calls_{0};
};

struct HttpClientConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model = "qwen-vl-chat";
  std::string api_key;   // sent as a bearer token when non-empty
  int timeout_seconds = 60;

  /// Reads STICKER_CHAT_BASE_URL, STICKER_CHAT_API_KEY and STICKER_CHAT_MODEL.
  /// Returns nullopt when no base URL is configured.
  static std::optional<HttpClientConfig> from_env();
};

/// OpenAI-compatible /chat/completions client. The image is attached as a
/// base64 PNG data URL to the first user turn.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  std::string complete(const ChatRequest& request) override;
  std::string model_name() const override { return config_.model; }

  /// The JSON body that `complete` would POST.
  std::string request_body(const ChatRequest& request) const;

 private:
  HttpClientConfig config_;
};

struct AttributeDescriptions {
  std::string id;
  std::string content;
  std::string style;
  std::string role;
  std::string action;
  std::string source_model;
  std::string prompt_hash;
  bool fallback = false;  // labels were missing from the reply

  bool operator==(const AttributeDescriptions&) const = default;
};

/// Parses "Content:/Style:/Role:/Action:" lines (case-insensitive). When no
/// label is present the whole reply becomes `content` and the rest "unknown".
AttributeDescriptions parse_reply(const std::string& reply);

std::string to_json_line(const AttributeDescriptions& desc);
AttributeDescriptions from_json_line(const std::string& line);

/// Append-only JSON-Lines cache keyed by sticker id. Writes are serialized.
class DescriptionCache {
 public:
  DescriptionCache() = default;  // in-memory only
  explicit DescriptionCache(std::filesystem::path path);

  std::optional<AttributeDescriptions> get(const std::string& id) const;
  void put(const AttributeDescriptions& desc);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::map<std::string, AttributeDescriptions> records_;
  mutable std::mutex mutex_;
};

struct DescribeOptions {
  int retries = 3;
};

/// Cache hit returns without touching the client; a miss runs every turn,
/// parses the final reply and appends it to the cache.
AttributeDescriptions describe(const StickerImage& sticker, ChatClient& client, DescriptionCache& cache,
                               const DescribeOptions& options = {});

struct DescribeStats {
  std::size_t cached = 0;
  std::size_t generated = 0;
};

/// Describes every sticker, in id order, with up to `parallelism` workers.
DescribeStats describe_all(const std::vector<StickerImage>& stickers, ChatClient& client,
                           DescriptionCache& cache, int parallelism = 1, const DescribeOptions& options = {});

struct TextEncoderConfig {
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int buckets = 4096;
  int max_tokens = 32;
  std::uint64_t seed = 1234;
};

/// Lower-cases, splits on non-alphanumerics and hashes words into buckets.
/// Bucket 0 is the placeholder used for empty strings.
std::vector<int> tokenize_text(const std::string& text, int buckets, int max_tokens);

/// Hashed token embedding + learned positions + small transformer encoder,
/// mean-pooled over tokens. Weights are a pure function of the config seed.
class TextEncoder {
 public:
  explicit TextEncoder(const TextEncoderConfig& config = {});

  const TextEncoderConfig& config() const { return config_; }
  std::vector<float> encode(const std::string& text) const;

  nn::ParameterSet<float>& parameters() { return params_; }

 private:
  TextEncoderConfig config_;
  nn::ParameterSet<float> params_;
  ag::Var<float> embedding_;
  ag::Var<float> positions_;
  nn::TransformerEncoder<float> encoder_;
};

/// Rows in attribute order: content, style, role, action.
using DescriptionEmbeddings = ag::Matrix<float>;

DescriptionEmbeddings encode_descriptions(const AttributeDescriptions& desc, const TextEncoder& encoder);

}  // namespace sticker::adg
