#pragma once

#include "entichart/treebank.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace entichart {

/// Errors in line-oriented inputs, reported as "source:line: message".
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& source, long line, const std::string& message);
  long line() const { return line_; }

 private:
  long line_;
};

/// {"tokens": [...], "tree": "(...)", "entities": [[i, j, type], ...]}; the
/// tree key is omitted when there is no gold tree.
nlohmann::ordered_json record_to_json(const SentenceRecord& record);
SentenceRecord record_from_json(const nlohmann::json& j);

/// One JSON object per non-blank line.
std::vector<SentenceRecord> read_corpus(std::istream& in, const std::string& source);
std::vector<SentenceRecord> read_corpus_file(const std::string& path);
void write_corpus(std::ostream& out, const std::vector<SentenceRecord>& records);

/// One bracketed tree per non-blank line.
std::vector<Tree> read_trees(std::istream& in, const std::string& source);
std::vector<Tree> read_trees_file(const std::string& path);

/// Standoff entity lines {"tokens": [...], "entities": [...]} aligned with
/// `trees` line for line. Tokens must match the tree's tokens.
std::vector<std::vector<EntitySpan>> read_entities(std::istream& in, const std::string& source,
                                                   const std::vector<Tree>& trees);
std::vector<std::vector<EntitySpan>> read_entities_file(const std::string& path, const std::vector<Tree>& trees);

}  // namespace entichart
