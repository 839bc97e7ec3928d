#include "kgpath/metrics.hpp"

#include <cctype>
#include <set>

namespace kgpath {

namespace {

std::set<std::string> normalized_set(std::span<const std::string> items) {
  std::set<std::string> out;
  for (const auto& s : items) {
    auto n = normalize_answer(s);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  std::size_t b = 0;
  while (b < out.size() && (punct(out[b]) || out[b] == ' ')) ++b;
  std::size_t e = out.size();
  while (e > b && (punct(out[e - 1]) || out[e - 1] == ' ')) --e;
  return out.substr(b, e - b);
}

int hits_at_1(std::span<const std::string> predictions, std::span<const std::string> gold) {
  if (predictions.empty()) return 0;
  auto g = normalized_set(gold);
  return g.count(normalize_answer(predictions.front())) ? 1 : 0;
}

double f1_score(std::span<const std::string> predictions, std::span<const std::string> gold) {
  auto p = normalized_set(predictions);
  auto g = normalized_set(gold);
  if (p.empty() || g.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& x : p) common += g.count(x);
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2 * precision * recall / (precision + recall);
}

double macro_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace kgpath
