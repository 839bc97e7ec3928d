#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace kgpath {

// Lowercases and splits on whitespace and ASCII punctuation. Underscores and
// dots are treated as punctuation, so "book.periodical.language" yields three
// tokens.
std::vector<std::string> tokenize(std::string_view text);

// Pretrained word vectors. Unknown tokens map to an all-zero UNK vector.
class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  // Throws DimensionMismatch when the vector size differs from dim().
  void add(std::string token, Eigen::VectorXd vec);
  bool contains(const std::string& token) const { return vectors_.count(token) > 0; }
  // UNK (zeros) for tokens not in the table.
  Eigen::VectorXd lookup(const std::string& token) const;

  // One column per token of `text`.
  Eigen::MatrixXd embed(std::string_view text) const;

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
};

// Standard text layout: `token v1 v2 ... vd` per line. The dimension is taken
// from the first line; a later line of a different width is an error.
WordVectorTable read_word_vectors(std::istream& in);
WordVectorTable load_word_vectors(const std::string& path);
void write_word_vectors(const WordVectorTable& table, const std::vector<std::string>& order,
                        std::ostream& out);

}  // namespace kgpath
