#include "kgpath/answer_reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kgpath/semantic_distiller.hpp"

namespace kgpath {

namespace {

constexpr std::string_view kInstructions =
    "Instructions:\n"
    "Please use the reasoning paths provided below to answer the question. The reasoning paths "
    "are listed in order of importance, with the first being the most important. Your task is to "
    "derive the simplest possible answer and return all potential answers as a list.\n"
    "\n"
    "Reasoning Paths:\n";

std::string strip(std::string_view s) {
  constexpr std::string_view junk = " \t\r\n\"'`";
  auto b = s.find_first_not_of(junk);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(junk);
  return std::string(s.substr(b, e - b + 1));
}

void push_unique(std::vector<std::string>& out, std::string item) {
  if (item.empty()) return;
  if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(std::move(item));
}

// End of the bracket group opening at `open`, honouring quoted strings.
std::size_t matching_bracket(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[') ++depth;
    else if (c == ']' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

std::vector<std::string> from_json_array(std::string_view raw) {
  std::vector<std::string> out;
  for (auto open = raw.find('['); open != std::string_view::npos; open = raw.find('[', open + 1)) {
    auto close = matching_bracket(raw, open);
    if (close == std::string_view::npos) break;
    auto j = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_array()) continue;
    for (const auto& e : j) push_unique(out, strip(e.is_string() ? e.get<std::string>() : e.dump()));
    if (!out.empty()) return out;
  }
  return out;
}

std::vector<std::string> from_bracketed_list(std::string_view raw) {
  std::vector<std::string> out;
  auto open = raw.find('[');
  if (open == std::string_view::npos) return out;
  auto close = raw.find(']', open);
  if (close == std::string_view::npos) return out;
  auto inner = raw.substr(open + 1, close - open - 1);
  std::size_t pos = 0;
  while (pos <= inner.size()) {
    auto comma = inner.find(',', pos);
    auto piece = inner.substr(pos, comma == std::string_view::npos ? comma : comma - pos);
    push_unique(out, strip(piece));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string strip_bullet(std::string line) {
  line = strip(line);
  std::size_t i = 0;
  if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
    i = 1;
  } else {
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) ++i;
    else i = 0;
  }
  line = strip(std::string_view(line).substr(i));
  while (!line.empty() && (line.back() == '.' || line.back() == ',' || line.back() == ';'))
    line.pop_back();
  return strip(line);
}

// Lines after the last "answer:" / "answers:" cue.
std::vector<std::string> from_answer_cue(std::string_view raw) {
  std::string lower(raw);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t cue = std::string::npos;
  for (std::size_t pos = lower.find("answer"); pos != std::string::npos;
       pos = lower.find("answer", pos + 1)) {
    auto after = pos + 6;
    if (after < lower.size() && lower[after] == 's') ++after;
    auto skip_blanks = [&] {
      while (after < lower.size() && (lower[after] == ' ' || lower[after] == '\t')) ++after;
    };
    skip_blanks();
    // "answer is:" and "answers are:" count as cues too.
    for (std::string_view verb : {"is", "are"}) {
      if (lower.compare(after, verb.size(), verb) == 0) {
        after += verb.size();
        skip_blanks();
        break;
      }
    }
    if (after < lower.size() && lower[after] == ':') cue = after + 1;
  }
  std::vector<std::string> out;
  if (cue == std::string::npos) return out;
  std::istringstream in{std::string(raw.substr(cue))};
  for (std::string line; std::getline(in, line);) push_unique(out, strip_bullet(line));
  return out;
}

}  // namespace

std::string render_reasoning_prompt(std::string_view question,
                                    std::span<const std::string> path_lines) {
  std::string out(kInstructions);
  if (path_lines.empty()) {
    out.append(kNoPathsMarker);
  } else {
    for (std::size_t i = 0; i < path_lines.size(); ++i) {
      if (i) out.push_back('\n');
      out.append(path_lines[i]);
    }
  }
  out.append("\n\nQuestion:\n");
  out.append(question);
  return out;
}

PromptBundle build_reasoning_prompt(const QAInstance& inst, std::span<const ScoredPath> ordered,
                                    const KnowledgeGraph& kg) {
  std::vector<std::string> lines;
  lines.reserve(ordered.size());
  for (const auto& sp : ordered) lines.push_back(path_to_text(sp.path, kg));
  return {render_reasoning_prompt(inst.question, lines), static_cast<int>(lines.size()), inst.id};
}

AnswerSet parse_answers(std::string_view raw) {
  AnswerSet out;
  out.raw = std::string(raw);
  out.answers = from_json_array(raw);
  if (out.answers.empty()) out.answers = from_bracketed_list(raw);
  if (out.answers.empty()) out.answers = from_answer_cue(raw);
  out.parse_failure = out.answers.empty();
  return out;
}

AnswerSet answer(const QAInstance& inst, std::span<const ScoredPath> ordered,
                 const KnowledgeGraph& kg, LMClient& lm, double temperature) {
  auto prompt = build_reasoning_prompt(inst, ordered, kg);
  GenerateOptions opts;
  opts.temperature = temperature;
  opts.num_return = 1;
  auto replies = lm.generate(prompt.text, opts);
  auto out = parse_answers(replies.empty() ? std::string_view() : std::string_view(replies.front()));
  out.prompt = std::move(prompt.text);
  return out;
}

}  // namespace kgpath
