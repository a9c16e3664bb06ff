#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace sarnarrator {

struct PromptTemplate {
  std::string header;
  std::vector<std::string> principles;
};

// Radar-adaptation rewrite instructions (4 principles).
const PromptTemplate& sar_rewrite_template();
// Proportion/visual fusion instructions (5 principles).
const PromptTemplate& fusion_template();

struct IclExample {
  std::string source_caption;
  std::string rewritten_caption;

  bool operator==(const IclExample&) const = default;
};

// Line-delimited JSON {"source_caption","rewritten_caption"}; entries must be
// non-empty and source must differ from rewritten.
std::vector<IclExample> read_icl_store(const std::string& path);
void write_icl_store(const std::vector<IclExample>& examples,
                     const std::string& path);

// n distinct examples via a seeded partial shuffle; same (store, n, seed)
// yields the same selection.
std::vector<IclExample> select_icl_examples(
    const std::vector<IclExample>& store, size_t n, uint64_t seed);

// header, numbered principles, "Input:/Output:" example pairs, then the
// target caption as the final open input.
std::string build_rewrite_prompt(const std::string& caption,
                                 const std::vector<IclExample>& examples);
// header, numbered principles, then the two captions labeled A and B.
std::string build_fusion_prompt(const std::string& caption_a,
                                const std::string& caption_b);

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
};

// Canonical request body {"model","messages":[{"role":"user","content"}],
// "temperature"}; its SHA-256 is the cassette key.
std::string chat_request_body(const ChatRequest& request);
std::string chat_request_sha256(const ChatRequest& request);

// One completion attempt; retries live in the callers so attempt counts stay
// observable.
class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

// Runtime-bounded counting semaphore for in-flight request limiting.
class BoundedGate {
 public:
  explicit BoundedGate(int limit);
  void acquire();
  void release();
  int peak() const;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

struct HttpEndpointConfig {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string api_key;
  int max_concurrency = 4;
  double requests_per_second = 0.0;  // 0 disables rate limiting
  int timeout_seconds = 60;
};

// OpenAI-compatible POST {base_url}/chat/completions. Transport and protocol
// failures raise EndpointError; thread-safe up to max_concurrency in-flight
// requests under a shared token bucket.
class HttpChatEndpoint final : public ChatEndpoint {
 public:
  explicit HttpChatEndpoint(HttpEndpointConfig config);
  ~HttpChatEndpoint() override;
  std::string complete(const ChatRequest& request) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves recorded responses keyed by request hash; a missing cassette file
// reads as empty. With a live endpoint attached, misses are forwarded and the
// responses appended (record mode). Safe for concurrent reads; writes are
// serialized.
class ReplayEndpoint final : public ChatEndpoint {
 public:
  explicit ReplayEndpoint(std::string cassette_path);
  ReplayEndpoint(std::string cassette_path, std::unique_ptr<ChatEndpoint> live);
  ~ReplayEndpoint() override;
  std::string complete(const ChatRequest& request) override;
  size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RewriteJob {
  std::string record_id;
  std::vector<std::string> input_captions;  // 1 = rewrite, 2 = fusion
  std::vector<IclExample> selected_examples;
  uint64_t seed = 0;
};

// Job seed mixes the configured seed with the record id so per-record
// example choices stay stable under corpus reordering.
RewriteJob make_rewrite_job(const std::string& record_id, std::string caption,
                            const std::vector<IclExample>& store, size_t n,
                            uint64_t config_seed);

struct RewriteOptions {
  std::string model = "deepseek-chat";
  double temperature = 0.0;
  int retries = 3;  // total attempts
  int backoff_initial_ms = 200;
  bool fallback_enabled = true;
};

struct RewriteOutcome {
  std::string caption;
  bool fallback_used = false;
  int attempts = 0;
};

// Endpoint rewrite with retry/backoff; transport failure after the final
// attempt falls back to rule_rewrite when enabled. An empty completion is an
// error either way.
RewriteOutcome rewrite_caption(ChatEndpoint& endpoint, const RewriteJob& job,
                               const RewriteOptions& options);
RewriteOutcome fuse_captions(ChatEndpoint& endpoint,
                             const std::string& caption_a,
                             const std::string& caption_b,
                             const RewriteOptions& options);

// Deterministic fallback approximating the rewrite principles: color-word
// deletion, hedge-clause deletion, tree noun-phrase deletion, camera-phrase
// deletion (a sentence is dropped only when emptied), then spacing and
// sentence-start normalization. Idempotent.
std::string rule_rewrite(const std::string& caption);

}  // namespace sarnarrator
