#include "kgpath/word_vectors.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "kgpath/errors.hpp"

namespace kgpath {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back(static_cast<char>(std::tolower(c)));
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void WordVectorTable::add(std::string token, Eigen::VectorXd vec) {
  if (vec.size() != dim_)
    throw DimensionMismatch("word vector for '" + token + "' has " +
                            std::to_string(vec.size()) + " components, table has " +
                            std::to_string(dim_));
  vectors_[std::move(token)] = std::move(vec);
}

Eigen::VectorXd WordVectorTable::lookup(const std::string& token) const {
  auto it = vectors_.find(token);
  if (it == vectors_.end()) return Eigen::VectorXd::Zero(dim_);
  return it->second;
}

Eigen::MatrixXd WordVectorTable::embed(std::string_view text) const {
  auto tokens = tokenize(text);
  Eigen::MatrixXd out(dim_, static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = lookup(tokens[i]);
  return out;
}

WordVectorTable read_word_vectors(std::istream& in) {
  WordVectorTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    values.clear();
    double v;
    while (ss >> v) values.push_back(v);
    if (!ss.eof()) throw MalformedRecord(line_no, "non-numeric component in word vector");
    if (values.empty()) throw MalformedRecord(line_no, "word vector without components");
    if (table.dim() == 0) table = WordVectorTable(static_cast<int>(values.size()));
    if (static_cast<int>(values.size()) != table.dim())
      throw MalformedRecord(line_no, "expected " + std::to_string(table.dim()) +
                                         " components, got " + std::to_string(values.size()));
    table.add(token, Eigen::Map<Eigen::VectorXd>(values.data(),
                                                 static_cast<Eigen::Index>(values.size())));
  }
  return table;
}

WordVectorTable load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open word-vector file: " + path);
  return read_word_vectors(in);
}

void write_word_vectors(const WordVectorTable& table, const std::vector<std::string>& order,
                        std::ostream& out) {
  out << std::setprecision(17);
  for (const auto& token : order) {
    auto v = table.lookup(token);
    out << token;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v[i];
    out << '\n';
  }
}

}  // namespace kgpath
