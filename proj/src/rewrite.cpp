#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sarnarrator/rewrite.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sarnarrator/errors.hpp"
#include "sarnarrator/util.hpp"

namespace sarnarrator {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Case-insensitive whole-word match; multi-word needles must be
// single-spaced, which holds because callers normalize first.
size_t find_word(const std::string& text, const std::string& needle,
                 size_t from) {
  const std::string hay = to_lower(text);
  const std::string ned = to_lower(needle);
  size_t pos = from;
  while ((pos = hay.find(ned, pos)) != std::string::npos) {
    const size_t end = pos + ned.size();
    const bool left_ok = pos == 0 || !word_char(text[pos - 1]);
    const bool right_ok = end == text.size() || !word_char(text[end]);
    if (left_ok && right_ok) return pos;
    ++pos;
  }
  return std::string::npos;
}

std::string remove_word(std::string text, const std::string& needle) {
  size_t pos;
  while ((pos = find_word(text, needle, 0)) != std::string::npos) {
    text.replace(pos, needle.size(), " ");
  }
  return normalize_spaces(text);
}

const std::vector<std::string>& color_lexicon() {
  static const std::vector<std::string> words = {
      "black and white", "gray",   "grey",     "black", "white", "shades",
      "shade",           "colored", "colorful", "green", "blue",  "brown",
      "red",             "yellow",  "orange",   "dark",  "light"};
  return words;
}

const std::vector<std::string>& hedge_markers() {
  static const std::vector<std::string> words = {
      "appears to be", "seems to", "might be", "possibly",
      "likely",        "perhaps",  "probably"};
  return words;
}

const std::vector<std::string>& np_modifier_lexicon() {
  static const std::vector<std::string> words = {
      "a",     "an",       "the",      "some",  "few",   "several",
      "many",  "numerous", "scattered", "dense", "sparse", "tall",
      "small", "large",    "lush",     "leafy", "nearby", "surrounding"};
  return words;
}

const std::vector<std::string>& camera_lexicon() {
  static const std::vector<std::string> words = {
      "aerial photograph", "image quality", "camera", "photograph",
      "photo",             "resolution",    "angle",  "lens"};
  return words;
}

// Previous word before `pos`, or empty when the text starts or punctuation
// intervenes. `start_out` receives the word's byte offset.
std::string previous_word(const std::string& text, size_t pos,
                          size_t& start_out) {
  size_t q = pos;
  while (q > 0 && std::isspace(static_cast<unsigned char>(text[q - 1]))) --q;
  if (q == 0 || !word_char(text[q - 1])) return "";
  size_t ws = q;
  while (ws > 0 && word_char(text[ws - 1])) --ws;
  start_out = ws;
  return to_lower(text.substr(ws, q - ws));
}

std::string apply_hedge_rule(std::string text) {
  for (;;) {
    text = normalize_spaces(text);
    size_t best = std::string::npos;
    size_t best_len = 0;
    for (const std::string& marker : hedge_markers()) {
      const size_t pos = find_word(text, marker, 0);
      if (pos < best) {
        best = pos;
        best_len = marker.size();
      }
    }
    if (best == std::string::npos) break;

    const size_t boundary = text.find_first_of(",.", best + best_len);
    size_t p = best;
    while (p > 0 && std::isspace(static_cast<unsigned char>(text[p - 1]))) --p;
    const bool preceded_by_comma = p > 0 && text[p - 1] == ',';

    if (boundary == std::string::npos) {
      text.erase(preceded_by_comma ? p - 1 : best);
    } else if (text[boundary] == ',') {
      if (preceded_by_comma) {
        // Appositive: both delimiting commas go with the clause.
        text.erase(p - 1, boundary - (p - 1) + 1);
      } else {
        text.erase(best, boundary - best);
      }
    } else {
      // Clause runs to the sentence end; a dangling comma before the marker
      // goes too.
      const size_t start = preceded_by_comma ? p - 1 : best;
      text.erase(start, boundary - start);
    }
  }
  return normalize_spaces(text);
}

std::string apply_tree_rule(std::string text) {
  for (;;) {
    text = normalize_spaces(text);
    size_t head = find_word(text, "trees", 0);
    size_t head_len = 5;
    const size_t singular = find_word(text, "tree", 0);
    if (singular < head) {
      head = singular;
      head_len = 4;
    }
    if (head == std::string::npos) break;

    size_t start = head;
    for (;;) {
      size_t word_start = 0;
      const std::string prev = previous_word(text, start, word_start);
      if (prev.empty() ||
          std::find(np_modifier_lexicon().begin(), np_modifier_lexicon().end(),
                    prev) == np_modifier_lexicon().end()) {
        break;
      }
      start = word_start;
    }
    text.erase(start, head + head_len - start);
  }
  return normalize_spaces(text);
}

bool is_determiner(const std::string& word) {
  return word == "a" || word == "an" || word == "the" || word == "this" ||
         word == "that";
}

std::string drop_empty_sentences(const std::string& text) {
  std::string out;
  size_t start = 0;
  while (start < text.size()) {
    const size_t dot = text.find('.', start);
    const size_t end = dot == std::string::npos ? text.size() : dot + 1;
    const std::string sentence = text.substr(start, end - start);
    if (std::any_of(sentence.begin(), sentence.end(), word_char)) {
      out += sentence;
    }
    start = end;
  }
  return out;
}

std::string apply_camera_rule(std::string text) {
  for (;;) {
    text = normalize_spaces(text);
    size_t best = std::string::npos;
    size_t best_len = 0;
    for (const std::string& phrase : camera_lexicon()) {
      const size_t pos = find_word(text, phrase, 0);
      if (pos < best) {
        best = pos;
        best_len = phrase.size();
      }
    }
    if (best == std::string::npos) break;

    size_t start = best;
    size_t word_start = 0;
    if (is_determiner(previous_word(text, best, word_start))) {
      start = word_start;
    }
    text.erase(start, best + best_len - start);
  }
  return normalize_spaces(drop_empty_sentences(normalize_spaces(text)));
}

void replace_all_in_place(std::string& text, const std::string& from,
                          const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
  }
}

std::string tidy(std::string text) {
  text = normalize_spaces(text);
  for (;;) {
    const std::string before = text;
    replace_all_in_place(text, " ,", ",");
    replace_all_in_place(text, " .", ".");
    replace_all_in_place(text, " ;", ";");
    replace_all_in_place(text, " :", ":");
    replace_all_in_place(text, ",,", ",");
    replace_all_in_place(text, ",.", ".");
    if (text == before) break;
  }
  // Orphan connectors left at a sentence start by a deletion.
  for (size_t i = 0; i <= text.size();) {
    const bool at_start = i == 0 || (i >= 2 && text[i - 2] == '.');
    if (at_start && i < text.size() &&
        (text[i] == ',' || text[i] == ';' || text[i] == ':')) {
      size_t end = i + 1;
      while (end < text.size() &&
             std::isspace(static_cast<unsigned char>(text[end]))) {
        ++end;
      }
      text.erase(i, end - i);
      continue;
    }
    ++i;
  }
  text = normalize_spaces(text);
  bool capitalize = true;
  for (char& c : text) {
    if (capitalize && std::isalpha(static_cast<unsigned char>(c))) {
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      capitalize = false;
    } else if (c == '.') {
      capitalize = true;
    }
  }
  return text;
}

nlohmann::json parse_json_or_raise(const std::string& text,
                                   const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(errc::malformed_document, what + ": " + e.what());
  }
}

struct ParsedUrl {
  std::string host_port;  // scheme://host[:port]
  std::string prefix;     // path without trailing slash, possibly empty
};

ParsedUrl parse_base_url(const std::string& base_url) {
  const size_t scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    raise(errc::config_error, "base_url must include a scheme: " + base_url);
  }
  const size_t path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

class TokenBucket {
 public:
  explicit TokenBucket(double rps)
      : rps_(rps), capacity_(std::max(1.0, rps)), tokens_(capacity_),
        last_(std::chrono::steady_clock::now()) {}

  void take() {
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double seconds = (1.0 - tokens_) / rps_;
      lock.unlock();
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
      lock.lock();
    }
  }

 private:
  void refill() {
    const auto now = std::chrono::steady_clock::now();
    const std::chrono::duration<double> elapsed = now - last_;
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed.count() * rps_);
  }

  std::mutex mutex_;
  double rps_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace

const PromptTemplate& sar_rewrite_template() {
  static const PromptTemplate t = {
      "Rewrite the existing description to suit Radar images by following "
      "these principles:",
      {"Remove color descriptions, such as gray, black, shades and white.",
       "Remove speculative or tentative descriptions, such as “possibly "
       "buildings or storage facilities.”",
       "Preserve primary visual objects but omit descriptions of trees.",
       "Remove irrelevant details unrelated to visual objects, such as "
       "references to camera properties or imaging conditions."}};
  return t;
}

const PromptTemplate& fusion_template() {
  static const PromptTemplate t = {
      "Rewrite the existing description to integrate object category "
      "proportions and their visual interpretations by following these "
      "principles:",
      {"Avoid specific numbers: Refrain from using specific numerical "
       "percentages. Instead, use qualitative terms such as “dominates,” "
       "“covers a significant portion,” or “forms the majority” to describe "
       "proportions.",
       "Use Specific Terminology: If the description provides more specific "
       "terms (e.g., “river” or “lake” instead of the general “water”), "
       "prioritize these specific terms and exclude the more general terms "
       "from the first description.",
       "Emphasize Dominant Features: Prioritize the most visually dominant "
       "features in the image, and mention the less prominent elements "
       "afterward. If multiple categories have similar proportions, mention "
       "them in descending order of visual significance.",
       "Ensure Clarity and Fluidity: The final sentence should be concise, "
       "clear, and read like a natural image caption. It should summarize "
       "the visual content effectively while maintaining fluency. Avoid "
       "redundancy.",
       "Describe All Major Categories: If the description lists multiple "
       "categories, ensure the final sentence reflects all significant "
       "elements, even if their proportions are small, but ensure brevity."}};
  return t;
}

std::vector<IclExample> read_icl_store(const std::string& path) {
  std::vector<IclExample> examples;
  size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const nlohmann::json j = parse_json_or_raise(line, where);
    IclExample example;
    try {
      example.source_caption = j.at("source_caption").get<std::string>();
      example.rewritten_caption = j.at("rewritten_caption").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      raise(errc::malformed_document, where + ": " + e.what());
    }
    if (example.source_caption.empty() || example.rewritten_caption.empty() ||
        example.source_caption == example.rewritten_caption) {
      raise(errc::malformed_document,
            where + ": example captions must be non-empty and distinct");
    }
    examples.push_back(std::move(example));
  }
  return examples;
}

void write_icl_store(const std::vector<IclExample>& examples,
                     const std::string& path) {
  std::string body;
  for (const IclExample& example : examples) {
    nlohmann::ordered_json j;
    j["source_caption"] = example.source_caption;
    j["rewritten_caption"] = example.rewritten_caption;
    body += j.dump();
    body += '\n';
  }
  write_file(path, body);
}

std::vector<IclExample> select_icl_examples(
    const std::vector<IclExample>& store, size_t n, uint64_t seed) {
  if (store.size() < n) {
    raise(errc::insufficient_examples,
          "store has " + std::to_string(store.size()) +
              " examples, need " + std::to_string(n));
  }
  std::vector<size_t> indices(store.size());
  std::iota(indices.begin(), indices.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::vector<IclExample> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t j = i + bounded_rand(rng, indices.size() - i);
    std::swap(indices[i], indices[j]);
    out.push_back(store[indices[i]]);
  }
  return out;
}

namespace {

std::string render_header(const PromptTemplate& t) {
  std::string out = t.header;
  out += '\n';
  for (size_t i = 0; i < t.principles.size(); ++i) {
    out += "[" + std::to_string(i + 1) + "] " + t.principles[i] + "\n";
  }
  return out;
}

}  // namespace

std::string build_rewrite_prompt(const std::string& caption,
                                 const std::vector<IclExample>& examples) {
  if (caption.empty()) {
    raise(errc::invalid_argument, "rewrite caption must be non-empty");
  }
  std::string out = render_header(sar_rewrite_template());
  for (const IclExample& example : examples) {
    out += "\nInput: " + example.source_caption +
           "\nOutput: " + example.rewritten_caption + "\n";
  }
  out += "\nInput: " + caption + "\nOutput:";
  return out;
}

std::string build_fusion_prompt(const std::string& caption_a,
                                const std::string& caption_b) {
  if (caption_a.empty() || caption_b.empty()) {
    raise(errc::invalid_argument, "both fusion captions must be non-empty");
  }
  std::string out = render_header(fusion_template());
  out += "\nCaption A: " + caption_a + "\nCaption B: " + caption_b;
  return out;
}

std::string chat_request_body(const ChatRequest& request) {
  nlohmann::ordered_json j;
  j["model"] = request.model;
  j["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", request.prompt}}});
  j["temperature"] = request.temperature;
  return j.dump();
}

std::string chat_request_sha256(const ChatRequest& request) {
  return sha256_hex(chat_request_body(request));
}

struct BoundedGate::State {
  std::mutex mutex;
  std::condition_variable cv;
  int limit = 1;
  int in_flight = 0;
  int peak = 0;
};

BoundedGate::BoundedGate(int limit) : state_(std::make_shared<State>()) {
  state_->limit = std::max(1, limit);
}

void BoundedGate::acquire() {
  std::unique_lock<std::mutex> lock(state_->mutex);
  state_->cv.wait(lock, [&] { return state_->in_flight < state_->limit; });
  ++state_->in_flight;
  state_->peak = std::max(state_->peak, state_->in_flight);
}

void BoundedGate::release() {
  {
    std::lock_guard<std::mutex> lock(state_->mutex);
    --state_->in_flight;
  }
  state_->cv.notify_one();
}

int BoundedGate::peak() const {
  std::lock_guard<std::mutex> lock(state_->mutex);
  return state_->peak;
}

struct HttpChatEndpoint::Impl {
  HttpEndpointConfig config;
  ParsedUrl url;
  BoundedGate gate;
  std::unique_ptr<TokenBucket> bucket;

  explicit Impl(HttpEndpointConfig cfg)
      : config(std::move(cfg)), url(parse_base_url(config.base_url)),
        gate(config.max_concurrency) {
    if (config.requests_per_second > 0.0) {
      bucket = std::make_unique<TokenBucket>(config.requests_per_second);
    }
  }
};

HttpChatEndpoint::HttpChatEndpoint(HttpEndpointConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpChatEndpoint::~HttpChatEndpoint() = default;

std::string HttpChatEndpoint::complete(const ChatRequest& request) {
  if (impl_->bucket) impl_->bucket->take();
  impl_->gate.acquire();
  struct Release {
    BoundedGate& gate;
    ~Release() { gate.release(); }
  } release{impl_->gate};

  httplib::Client client(impl_->url.host_port);
  client.set_connection_timeout(impl_->config.timeout_seconds, 0);
  client.set_read_timeout(impl_->config.timeout_seconds, 0);
  httplib::Headers headers;
  if (!impl_->config.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->config.api_key);
  }

  const auto result =
      client.Post(impl_->url.prefix + "/chat/completions", headers,
                  chat_request_body(request), "application/json");
  if (!result) {
    raise(errc::endpoint_error,
          "transport failure: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    raise(errc::endpoint_error,
          "HTTP " + std::to_string(result->status) + " from endpoint: " +
              result->body.substr(0, 200));
  }
  const nlohmann::json j =
      parse_json_or_raise(result->body, "completion response");
  try {
    return j.at("choices").at(0).at("message").at("content")
        .get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    raise(errc::endpoint_error,
          std::string("malformed completion response: ") + e.what());
  }
}

struct ReplayEndpoint::Impl {
  std::string path;
  std::unique_ptr<ChatEndpoint> live;
  mutable std::shared_mutex mutex;
  std::unordered_map<std::string, std::string> entries;

  void load_cassette() {
    if (!std::filesystem::exists(path)) return;
    size_t line_no = 0;
    for (const std::string& line : read_lines(path)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const std::string where = path + ":" + std::to_string(line_no);
      const nlohmann::json j = parse_json_or_raise(line, where);
      try {
        entries[j.at("request_sha256").get<std::string>()] =
            j.at("response_text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        raise(errc::malformed_document, where + ": " + e.what());
      }
    }
  }
};

ReplayEndpoint::ReplayEndpoint(std::string cassette_path)
    : impl_(std::make_unique<Impl>()) {
  impl_->path = std::move(cassette_path);
  impl_->load_cassette();
}

ReplayEndpoint::ReplayEndpoint(std::string cassette_path,
                               std::unique_ptr<ChatEndpoint> live)
    : impl_(std::make_unique<Impl>()) {
  impl_->path = std::move(cassette_path);
  impl_->live = std::move(live);
  impl_->load_cassette();
}

ReplayEndpoint::~ReplayEndpoint() = default;

size_t ReplayEndpoint::size() const {
  std::shared_lock<std::shared_mutex> lock(impl_->mutex);
  return impl_->entries.size();
}

std::string ReplayEndpoint::complete(const ChatRequest& request) {
  const std::string key = chat_request_sha256(request);
  {
    std::shared_lock<std::shared_mutex> lock(impl_->mutex);
    const auto it = impl_->entries.find(key);
    if (it != impl_->entries.end()) return it->second;
  }
  if (!impl_->live) {
    raise(errc::endpoint_error, "no cassette entry for request " + key);
  }
  const std::string text = impl_->live->complete(request);
  {
    std::unique_lock<std::shared_mutex> lock(impl_->mutex);
    impl_->entries[key] = text;
    const auto parent = std::filesystem::path(impl_->path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(impl_->path, std::ios::app | std::ios::binary);
    nlohmann::ordered_json j;
    j["request_sha256"] = key;
    j["response_text"] = text;
    out << j.dump() << '\n';
    if (!out) raise(errc::io_error, "cannot append to cassette " + impl_->path);
  }
  return text;
}

RewriteJob make_rewrite_job(const std::string& record_id, std::string caption,
                            const std::vector<IclExample>& store, size_t n,
                            uint64_t config_seed) {
  RewriteJob job;
  job.record_id = record_id;
  job.input_captions.push_back(std::move(caption));
  job.seed = config_seed ^ fnv1a64(record_id);
  job.selected_examples = select_icl_examples(store, n, job.seed);
  return job;
}

namespace {

std::string complete_with_retries(ChatEndpoint& endpoint,
                                  const ChatRequest& request,
                                  const RewriteOptions& options,
                                  int& attempts) {
  attempts = 0;
  const int total = std::max(1, options.retries);
  for (;;) {
    ++attempts;
    try {
      return endpoint.complete(request);
    } catch (const Error& e) {
      if (e.code() != errc::endpoint_error || attempts >= total) throw;
      const int delay_ms = options.backoff_initial_ms << (attempts - 1);
      if (delay_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      }
    }
  }
}

RewriteOutcome run_with_fallback(ChatEndpoint& endpoint,
                                 const ChatRequest& request,
                                 const RewriteOptions& options,
                                 const std::string& fallback_input,
                                 const std::string& record_id) {
  RewriteOutcome out;
  try {
    out.caption = trim(complete_with_retries(endpoint, request, options,
                                             out.attempts));
  } catch (const Error& e) {
    if (e.code() != errc::endpoint_error || !options.fallback_enabled) throw;
    out.caption = rule_rewrite(fallback_input);
    // A fallback caption may come out empty when the whole input was banned
    // content; records must still carry text.
    if (out.caption.empty()) out.caption = trim(fallback_input);
    out.fallback_used = true;
    return out;
  }
  if (out.caption.empty()) {
    raise(errc::empty_completion,
          "endpoint returned an empty completion for " + record_id);
  }
  return out;
}

}  // namespace

RewriteOutcome rewrite_caption(ChatEndpoint& endpoint, const RewriteJob& job,
                               const RewriteOptions& options) {
  if (job.input_captions.size() != 1 || job.input_captions[0].empty()) {
    raise(errc::invalid_argument,
          "rewrite job needs exactly one non-empty caption");
  }
  const ChatRequest request{
      options.model,
      build_rewrite_prompt(job.input_captions[0], job.selected_examples),
      options.temperature};
  return run_with_fallback(endpoint, request, options, job.input_captions[0],
                           "record " + job.record_id);
}

RewriteOutcome fuse_captions(ChatEndpoint& endpoint,
                             const std::string& caption_a,
                             const std::string& caption_b,
                             const RewriteOptions& options) {
  const ChatRequest request{options.model,
                            build_fusion_prompt(caption_a, caption_b),
                            options.temperature};
  return run_with_fallback(endpoint, request, options,
                           caption_a + " " + caption_b, "fusion request");
}

std::string rule_rewrite(const std::string& caption) {
  std::string text = normalize_spaces(caption);
  for (const std::string& color : color_lexicon()) {
    text = remove_word(text, color);
  }
  text = apply_hedge_rule(text);
  text = apply_tree_rule(text);
  text = apply_camera_rule(text);
  return tidy(text);
}

}  // namespace sarnarrator
