#pragma once

// Language-model boundary. Everything downstream talks to LMClient; the mock
// makes runs hermetic, the HTTP client speaks the OpenAI-style completions
// protocol.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kgpath {

struct GenerateOptions {
  int max_tokens = 256;
  double temperature = 0.0;
  int num_return = 1;
};

// Implementations must be safe to call from several threads at once.
class LMClient {
 public:
  virtual ~LMClient() = default;

  // Throws LMUnavailable when the model cannot be reached.
  virtual std::vector<std::string> generate(std::string_view prompt,
                                            const GenerateOptions& opts) = 0;
  // Natural-log probability of `continuation` given `prompt`.
  virtual double logprob(std::string_view prompt, std::string_view continuation) = 0;
};

// Scripted client. Script layout (JSON):
//
//   {
//     "rules": [
//       {"match": ["substring", ...], "responses": ["..."], "logprob": -1.5},
//       {"match": "substring", "continuation": "r1 -> r2", "logprob": -0.3},
//       {"match": "substring", "error": "simulated outage"}
//     ],
//     "default_responses": [],
//     "default_logprob": 0.0,
//     "uniform_vocab": 0
//   }
//
// A rule applies when every `match` substring occurs in the prompt (and, for
// logprob, when its `continuation` equals the continuation if given). The
// first applicable rule wins. generate returns the rule's responses, cycled
// up to num_return. logprob without an applicable rule is
// -L * ln(uniform_vocab) for a continuation of L whitespace tokens when
// uniform_vocab > 0, otherwise default_logprob. A rule with "error" throws
// LMUnavailable.
class MockLMClient : public LMClient {
 public:
  MockLMClient() = default;
  // Throws ConfigError on a malformed script.
  explicit MockLMClient(const nlohmann::json& script);
  static MockLMClient from_file(const std::string& path);

  std::vector<std::string> generate(std::string_view prompt, const GenerateOptions& opts) override;
  double logprob(std::string_view prompt, std::string_view continuation) override;

  // Scripting helpers.
  void add_response(std::vector<std::string> match, std::vector<std::string> responses);
  void add_logprob(std::vector<std::string> match, double value,
                   std::string continuation = std::string());
  void set_uniform_vocab(std::size_t v) { uniform_vocab_ = v; }
  void set_default_logprob(double v) { default_logprob_ = v; }

 private:
  struct Rule {
    std::vector<std::string> match;
    std::vector<std::string> responses;
    bool has_responses = false;
    bool has_logprob = false;
    double logprob = 0;
    bool has_continuation = false;
    std::string continuation;
    std::string error;
  };
  static bool applies(const Rule& r, std::string_view prompt);

  std::vector<Rule> rules_;
  std::vector<std::string> default_responses_;
  double default_logprob_ = 0;
  std::size_t uniform_vocab_ = 0;
};

struct HttpLMOptions {
  std::string base_url = "http://127.0.0.1:8000";  // scheme://host[:port][/prefix]
  std::string model;
  std::string token_env = "KGPATH_LM_TOKEN";  // bearer token, sent when set
  double timeout_seconds = 60;
};

// POSTs to {base_url}/v1/completions. logprob uses echo with max_tokens 0 and
// sums the token log-probabilities that fall inside the continuation.
class HttpLMClient : public LMClient {
 public:
  // Throws ConfigError for an unsupported URL.
  explicit HttpLMClient(HttpLMOptions opts);

  std::vector<std::string> generate(std::string_view prompt, const GenerateOptions& opts) override;
  double logprob(std::string_view prompt, std::string_view continuation) override;

 private:
  nlohmann::json post(const nlohmann::json& body) const;

  HttpLMOptions opts_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace kgpath
