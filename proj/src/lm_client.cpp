#include "kgpath/lm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kgpath/errors.hpp"

namespace kgpath {

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* what) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be a string or a list");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError(std::string(what) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::size_t whitespace_tokens(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::size_t n = 0;
  for (std::string tok; in >> tok;) ++n;
  return n;
}

}  // namespace

MockLMClient::MockLMClient(const nlohmann::json& script) {
  if (!script.is_object()) throw ConfigError("mock script must be a JSON object");
  try {
    for (const auto& r : script.value("rules", nlohmann::json::array())) {
      Rule rule;
      if (!r.contains("match")) throw ConfigError("mock rule without 'match'");
      rule.match = string_list(r.at("match"), "match");
      if (r.contains("responses")) {
        rule.responses = string_list(r.at("responses"), "responses");
        rule.has_responses = true;
      }
      if (r.contains("logprob")) {
        rule.logprob = r.at("logprob").get<double>();
        rule.has_logprob = true;
      }
      if (r.contains("continuation")) {
        rule.continuation = r.at("continuation").get<std::string>();
        rule.has_continuation = true;
      }
      rule.error = r.value("error", std::string());
      rules_.push_back(std::move(rule));
    }
    if (script.contains("default_responses"))
      default_responses_ = string_list(script.at("default_responses"), "default_responses");
    default_logprob_ = script.value("default_logprob", 0.0);
    uniform_vocab_ = script.value("uniform_vocab", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mock script: ") + e.what());
  }
}

MockLMClient MockLMClient::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path);
  try {
    return MockLMClient(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("mock script " + path + ": " + e.what());
  }
}

bool MockLMClient::applies(const Rule& r, std::string_view prompt) {
  for (const auto& m : r.match)
    if (prompt.find(m) == std::string_view::npos) return false;
  return true;
}

std::vector<std::string> MockLMClient::generate(std::string_view prompt,
                                                const GenerateOptions& opts) {
  const std::vector<std::string>* pool = &default_responses_;
  for (const auto& r : rules_) {
    if (!applies(r, prompt)) continue;
    if (!r.error.empty()) throw LMUnavailable(r.error);
    if (!r.has_responses) continue;
    pool = &r.responses;
    break;
  }
  std::vector<std::string> out;
  if (pool->empty()) return out;
  for (int i = 0; i < opts.num_return; ++i) out.push_back((*pool)[i % pool->size()]);
  return out;
}

double MockLMClient::logprob(std::string_view prompt, std::string_view continuation) {
  for (const auto& r : rules_) {
    if (!applies(r, prompt)) continue;
    if (!r.error.empty()) throw LMUnavailable(r.error);
    if (!r.has_logprob) continue;
    if (r.has_continuation && r.continuation != continuation) continue;
    return r.logprob;
  }
  if (uniform_vocab_ > 0)
    return -static_cast<double>(whitespace_tokens(continuation)) *
           std::log(static_cast<double>(uniform_vocab_));
  return default_logprob_;
}

void MockLMClient::add_response(std::vector<std::string> match,
                                std::vector<std::string> responses) {
  Rule r;
  r.match = std::move(match);
  r.responses = std::move(responses);
  r.has_responses = true;
  rules_.push_back(std::move(r));
}

void MockLMClient::add_logprob(std::vector<std::string> match, double value,
                               std::string continuation) {
  Rule r;
  r.match = std::move(match);
  r.logprob = value;
  r.has_logprob = true;
  r.has_continuation = !continuation.empty();
  r.continuation = std::move(continuation);
  rules_.push_back(std::move(r));
}

HttpLMClient::HttpLMClient(HttpLMOptions opts) : opts_(std::move(opts)) {
  const auto& url = opts_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("LM base URL needs a scheme: " + url);
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported LM URL scheme " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw ConfigError("built without TLS support; use an http:// LM URL");
#endif
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (opts_.timeout_seconds <= 0) throw ConfigError("LM timeout must be positive");
}

nlohmann::json HttpLMClient::post(const nlohmann::json& body) const {
  httplib::Client cli(scheme_host_port_);
  auto timeout = std::chrono::duration<double>(opts_.timeout_seconds);
  auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  cli.set_connection_timeout(micros);
  cli.set_read_timeout(micros);
  cli.set_write_timeout(micros);
  if (!opts_.token_env.empty())
    if (const char* token = std::getenv(opts_.token_env.c_str()); token && *token)
      cli.set_bearer_token_auth(token);

  auto res = cli.Post(path_prefix_ + "/v1/completions", body.dump(), "application/json");
  if (!res) throw LMUnavailable(scheme_host_port_ + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw LMUnavailable("HTTP " + std::to_string(res->status) + " from " + scheme_host_port_);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw LMUnavailable(std::string("unreadable response: ") + e.what());
  }
}

std::vector<std::string> HttpLMClient::generate(std::string_view prompt,
                                                const GenerateOptions& opts) {
  nlohmann::json body = {{"prompt", prompt},
                         {"max_tokens", opts.max_tokens},
                         {"temperature", opts.temperature},
                         {"n", opts.num_return}};
  if (!opts_.model.empty()) body["model"] = opts_.model;
  auto reply = post(body);
  std::vector<std::string> out;
  try {
    for (const auto& c : reply.at("choices")) out.push_back(c.at("text").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw LMUnavailable(std::string("unexpected completion payload: ") + e.what());
  }
  return out;
}

double HttpLMClient::logprob(std::string_view prompt, std::string_view continuation) {
  std::string full(prompt);
  full.append(continuation);
  nlohmann::json body = {
      {"prompt", full}, {"max_tokens", 0}, {"echo", true}, {"logprobs", 0}, {"temperature", 0.0}};
  if (!opts_.model.empty()) body["model"] = opts_.model;
  auto reply = post(body);
  try {
    const auto& lp = reply.at("choices").at(0).at("logprobs");
    const auto& values = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    double sum = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (offsets.at(i).get<std::size_t>() < prompt.size()) continue;
      if (values[i].is_null()) continue;
      sum += values[i].get<double>();
    }
    return sum;
  } catch (const nlohmann::json::exception& e) {
    throw LMUnavailable(std::string("unexpected logprob payload: ") + e.what());
  }
}

}  // namespace kgpath
