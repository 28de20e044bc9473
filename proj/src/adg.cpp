#include "sticker/adg.hpp"

#include "sticker/digest.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace sticker::adg {

using nlohmann::json;

namespace {

constexpr const char* kSystemTurn =
    "This is a sticker used in conversation. Look at the image and answer the questions about it.";
constexpr const char* kTextPresenceTurn = "Please determine if there is text in the sticker.";
constexpr const char* kTextContentTurn =
    "Only give the text content in the sticker without other unrelated words.";
constexpr const char* kAttributeTurn =
    "Consider the text in the sticker and provide a brief sentence in English to describe the style, role, "
    "and action of the sticker. Answer with four labeled lines: \"Content: <text in the sticker>\", "
    "\"Style: <style>\", \"Role: <role>\", \"Action: <action>\".";

constexpr const char* kUnknown = "unknown";

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string meta_or(const StickerImage& s, std::initializer_list<const char*> keys, const std::string& fallback) {
  for (const char* k : keys) {
    auto it = s.meta.find(k);
    if (it != s.meta.end() && !it->second.empty()) return it->second;
  }
  return fallback;
}

}  // namespace

std::vector<ChatTurn> build_prompt_turns(const StickerImage& /*sticker*/) {
  return {{"system", kSystemTurn},
          {"user", kTextPresenceTurn},
          {"user", kTextContentTurn},
          {"user", kAttributeTurn}};
}

std::string prompt_hash(const std::vector<ChatTurn>& turns) {
  std::string joined;
  for (const auto& t : turns) {
    joined += t.role;
    joined += '\x1f';
    joined += t.text;
    joined += '\x1e';
  }
  return sha256_hex(joined);
}

std::string StubChatClient::complete(const ChatRequest& request) {
  ++calls_;
  if (request.sticker == nullptr || request.messages.empty()) {
    throw TransportError("stub client needs a sticker and at least one message");
  }
  const StickerImage& s = *request.sticker;
  const std::string content = meta_or(s, {"content", "text"}, "no text");
  const std::string& question = request.messages.back().text;
  if (question == kTextPresenceTurn) {
    return content == "no text" ? "No, there is no text in the sticker." : "Yes, the sticker contains text.";
  }
  if (question == kTextContentTurn) return content;
  return "Content: " + content + "\nStyle: " + meta_or(s, {"style"}, "plain") +
         "\nRole: " + meta_or(s, {"role", "shape"}, "none") + "\nAction: " + meta_or(s, {"action"}, "none");
}

std::optional<HttpClientConfig> HttpClientConfig::from_env() {
  const char* base = std::getenv("STICKER_CHAT_BASE_URL");
  if (base == nullptr || *base == '\0') return std::nullopt;
  HttpClientConfig cfg;
  cfg.base_url = base;
  if (const char* key = std::getenv("STICKER_CHAT_API_KEY")) cfg.api_key = key;
  if (const char* model = std::getenv("STICKER_CHAT_MODEL"); model && *model) cfg.model = model;
  return cfg;
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw std::invalid_argument("HTTP chat client needs a base URL");
}

std::string HttpChatClient::request_body(const ChatRequest& request) const {
  json messages = json::array();
  bool image_attached = false;
  for (const auto& turn : request.messages) {
    if (turn.role == "user" && !image_attached && request.sticker != nullptr) {
      const auto png = encode_png(request.sticker->pixels);
      const std::string b64 = httplib::detail::base64_encode(std::string(png.begin(), png.end()));
      messages.push_back({{"role", "user"},
                          {"content", json::array({{{"type", "image_url"},
                                                    {"image_url", {{"url", "data:image/png;base64," + b64}}}},
                                                   {{"type", "text"}, {"text", turn.text}}})}});
      image_attached = true;
    } else {
      messages.push_back({{"role", turn.role}, {"content", turn.text}});
    }
  }
  json body = {{"model", config_.model}, {"messages", messages}, {"temperature", 0}};
  return body.dump();
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  // Split "scheme://host[:port]/prefix" into the client origin and the path prefix.
  const std::string& url = config_.base_url;
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client cli(origin);
  cli.set_connection_timeout(config_.timeout_seconds);
  cli.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = cli.Post(prefix + "/chat/completions", headers, request_body(request), "application/json");
  if (!res) throw TransportError("chat request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat response: ") + e.what());
  }
}

AttributeDescriptions parse_reply(const std::string& reply) {
  static const std::array<const char*, 4> labels = {"content", "style", "role", "action"};
  std::array<std::optional<std::string>, 4> found;
  std::size_t start = 0;
  while (start <= reply.size()) {
    auto end = reply.find('\n', start);
    if (end == std::string::npos) end = reply.size();
    std::string line = trim(reply.substr(start, end - start));
    while (!line.empty() && (line.front() == '-' || line.front() == '*' || line.front() == ' ')) line.erase(0, 1);
    const auto colon = line.find(':');
    if (colon != std::string::npos) {
      std::string key = lower(trim(line.substr(0, colon)));
      key.erase(std::remove(key.begin(), key.end(), '*'), key.end());
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (key == labels[i] && !found[i]) found[i] = trim(line.substr(colon + 1));
      }
    }
    start = end + 1;
  }

  AttributeDescriptions out;
  const bool any = std::any_of(found.begin(), found.end(), [](const auto& f) { return f.has_value(); });
  if (!any) {
    const std::string body = trim(reply);
    out.content = body.empty() ? kUnknown : body;
    out.style = out.role = out.action = kUnknown;
    out.fallback = true;
    return out;
  }
  std::array<std::string*, 4> slots = {&out.content, &out.style, &out.role, &out.action};
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (found[i] && !found[i]->empty()) {
      *slots[i] = *found[i];
    } else {
      *slots[i] = kUnknown;
      out.fallback = true;
    }
  }
  return out;
}

std::string to_json_line(const AttributeDescriptions& d) {
  json j = {{"id", d.id},           {"content", d.content},         {"style", d.style},
            {"role", d.role},       {"action", d.action},           {"source_model", d.source_model},
            {"prompt_hash", d.prompt_hash}, {"fallback", d.fallback}};
  return j.dump();
}

AttributeDescriptions from_json_line(const std::string& line) {
  const auto j = json::parse(line);
  AttributeDescriptions d;
  d.id = j.at("id").get<std::string>();
  d.content = j.at("content").get<std::string>();
  d.style = j.at("style").get<std::string>();
  d.role = j.at("role").get<std::string>();
  d.action = j.at("action").get<std::string>();
  d.source_model = j.value("source_model", "");
  d.prompt_hash = j.value("prompt_hash", "");
  d.fallback = j.value("fallback", false);
  return d;
}

DescriptionCache::DescriptionCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto d = from_json_line(line);
    records_[d.id] = std::move(d);
  }
}

std::optional<AttributeDescriptions> DescriptionCache::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void DescriptionCache::put(const AttributeDescriptions& desc) {
  std::lock_guard lock(mutex_);
  records_[desc.id] = desc;
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw std::runtime_error("cannot append to description cache " + path_.string());
    out << to_json_line(desc) << '\n';
  }
}

std::size_t DescriptionCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

namespace {

AttributeDescriptions generate(const StickerImage& sticker, ChatClient& client, const DescribeOptions& options) {
  const auto turns = build_prompt_turns(sticker);
  ChatRequest request;
  request.sticker = &sticker;
  request.messages.push_back(turns[0]);
  std::string reply;
  for (std::size_t t = 1; t < turns.size(); ++t) {
    request.messages.push_back(turns[t]);
    for (int attempt = 0;; ++attempt) {
      try {
        reply = client.complete(request);
        break;
      } catch (const TransportError& e) {
        if (attempt + 1 >= std::max(1, options.retries)) throw DescribeError(sticker.id, e.what());
      }
    }
    request.messages.push_back({"assistant", reply});
  }
  AttributeDescriptions d = parse_reply(reply);
  d.id = sticker.id;
  d.source_model = client.model_name();
  d.prompt_hash = prompt_hash(turns);
  return d;
}

}  // namespace

AttributeDescriptions describe(const StickerImage& sticker, ChatClient& client, DescriptionCache& cache,
                               const DescribeOptions& options) {
  if (auto hit = cache.get(sticker.id)) return *hit;
  auto d = generate(sticker, client, options);
  cache.put(d);
  return d;
}

DescribeStats describe_all(const std::vector<StickerImage>& stickers, ChatClient& client,
                           DescriptionCache& cache, int parallelism, const DescribeOptions& options) {
  std::vector<std::size_t> order(stickers.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return stickers[a].id < stickers[b].id; });

  DescribeStats stats;
  std::vector<std::size_t> pending;
  for (auto i : order) {
    if (cache.get(stickers[i].id)) {
      ++stats.cached;
    } else {
      pending.push_back(i);
    }
  }

  // Workers generate concurrently; results are appended in id order.
  std::vector<std::optional<AttributeDescriptions>> done(pending.size());
  std::mutex mutex;
  std::size_t next_job = 0;
  std::size_t next_write = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t job;
      {
        std::lock_guard lock(mutex);
        if (failure || next_job >= pending.size()) return;
        job = next_job++;
      }
      try {
        auto d = generate(stickers[pending[job]], client, options);
        std::lock_guard lock(mutex);
        done[job] = std::move(d);
        while (next_write < done.size() && done[next_write]) {
          cache.put(*done[next_write]);
          ++next_write;
          ++stats.generated;
        }
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(pending.size())));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return stats;
}

std::vector<int> tokenize_text(const std::string& text, int buckets, int max_tokens) {
  std::vector<int> ids;
  std::string word;
  const auto flush = [&] {
    if (word.empty()) return;
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : word) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    if (static_cast<int>(ids.size()) < max_tokens) ids.push_back(1 + static_cast<int>(h % static_cast<std::uint64_t>(buckets - 1)));
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  if (ids.empty()) ids.push_back(0);
  return ids;
}

TextEncoder::TextEncoder(const TextEncoderConfig& config) : config_(config) {
  nn::Initializer init(config.seed);
  embedding_ = params_.add("text.embedding", init.normal<float>(config.buckets, config.dim, 1.0));
  positions_ = params_.add("text.positions", init.normal<float>(config.max_tokens, config.dim, 0.1));
  encoder_ = nn::TransformerEncoder<float>(params_, "text.encoder",
                                           {config.dim, config.layers, config.heads, 4}, init);
}

std::vector<float> TextEncoder::encode(const std::string& text) const {
  ag::NoGradGuard no_grad;
  const auto ids = tokenize_text(text, config_.buckets, config_.max_tokens);
  std::vector<ag::Index> rows(ids.begin(), ids.end());
  std::vector<ag::Index> pos(ids.size());
  std::iota(pos.begin(), pos.end(), 0);
  auto x = ag::add(ag::select_rows(embedding_, rows), ag::select_rows(positions_, pos));
  auto h = encoder_(x, static_cast<ag::Index>(ids.size()));
  auto pooled = ag::block_mean_rows(h, static_cast<ag::Index>(ids.size()));
  return {pooled.value().data(), pooled.value().data() + pooled.value().size()};
}

DescriptionEmbeddings encode_descriptions(const AttributeDescriptions& desc, const TextEncoder& encoder) {
  const std::array<const std::string*, 4> fields = {&desc.content, &desc.style, &desc.role, &desc.action};
  DescriptionEmbeddings out(4, encoder.config().dim);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto v = encoder.encode(*fields[i]);
    for (int j = 0; j < encoder.config().dim; ++j) out(static_cast<ag::Index>(i), j) = v[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace sticker::adg
