#include "entichart/corpus.hpp"

#include "entichart/error.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace entichart {
namespace {

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

std::vector<EntitySpan> entities_from_json(const nlohmann::json& j) {
  std::vector<EntitySpan> out;
  if (!j.is_array()) throw ContractError("\"entities\" must be an array");
  for (const nlohmann::json& e : j) {
    if (!e.is_array() || e.size() != 3) throw ContractError("each entity must be [i, j, type]");
    out.push_back({{e[0].get<int>(), e[1].get<int>()}, e[2].get<std::string>()});
  }
  return out;
}

template <typename Fn>
void for_each_line(std::istream& in, const std::string& source, Fn&& fn) {
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    try {
      fn(line, number);
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw InputError(source, number, e.what());
    }
  }
}

}  // namespace

InputError::InputError(const std::string& source, long line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

nlohmann::ordered_json record_to_json(const SentenceRecord& record) {
  nlohmann::ordered_json j;
  j["tokens"] = record.tokens;
  if (record.gold_tree) j["tree"] = serialize_bracketed(*record.gold_tree);
  nlohmann::ordered_json es = nlohmann::ordered_json::array();
  for (const EntitySpan& e : record.entities) es.push_back({e.span.i, e.span.j, e.type});
  j["entities"] = es;
  return j;
}

SentenceRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("expected a JSON object");
  SentenceRecord r;
  for (const auto& [key, value] : j.items()) {
    if (key == "tokens") r.tokens = value.get<std::vector<std::string>>();
    else if (key == "tree") {
      if (!value.is_null()) r.gold_tree = parse_bracketed(value.get<std::string>());
    } else if (key == "entities") r.entities = entities_from_json(value);
    else throw ContractError("unknown key '" + key + "'");
  }
  if (!j.contains("tokens")) {
    if (!r.gold_tree) throw ContractError("record has neither tokens nor tree");
    r.tokens = r.gold_tree->tokens();
  }
  if (r.tokens.empty()) throw ContractError("record has no tokens");
  r.validate();
  return r;
}

std::vector<SentenceRecord> read_corpus(std::istream& in, const std::string& source) {
  std::vector<SentenceRecord> out;
  for_each_line(in, source, [&](const std::string& line, long) { out.push_back(record_from_json(nlohmann::json::parse(line))); });
  return out;
}

std::vector<SentenceRecord> read_corpus_file(const std::string& path) {
  std::ifstream in = open(path);
  return read_corpus(in, path);
}

void write_corpus(std::ostream& out, const std::vector<SentenceRecord>& records) {
  for (const SentenceRecord& r : records) out << record_to_json(r).dump() << '\n';
}

std::vector<Tree> read_trees(std::istream& in, const std::string& source) {
  std::vector<Tree> out;
  for_each_line(in, source, [&](const std::string& line, long) { out.push_back(parse_bracketed(line)); });
  return out;
}

std::vector<Tree> read_trees_file(const std::string& path) {
  std::ifstream in = open(path);
  return read_trees(in, path);
}

std::vector<std::vector<EntitySpan>> read_entities(std::istream& in, const std::string& source,
                                                   const std::vector<Tree>& trees) {
  std::vector<std::vector<EntitySpan>> out;
  long last = 0;
  for_each_line(in, source, [&](const std::string& line, long number) {
    last = number;
    if (out.size() == trees.size())
      throw ContractError("more entity lines than trees (" + std::to_string(trees.size()) + ")");
    const nlohmann::json j = nlohmann::json::parse(line);
    if (!j.is_object()) throw ContractError("expected a JSON object");
    SentenceRecord r;
    r.gold_tree = trees[out.size()];
    r.tokens = j.contains("tokens") ? j.at("tokens").get<std::vector<std::string>>() : r.gold_tree->tokens();
    if (r.tokens != r.gold_tree->tokens())
      throw ContractError("tokens do not match tree " + std::to_string(out.size() + 1));
    r.entities = entities_from_json(j.value("entities", nlohmann::json::array()));
    r.validate();
    out.push_back(std::move(r.entities));
  });
  if (out.size() != trees.size())
    throw InputError(source, last, "only " + std::to_string(out.size()) + " entity lines for " +
                                       std::to_string(trees.size()) + " trees");
  return out;
}

std::vector<std::vector<EntitySpan>> read_entities_file(const std::string& path, const std::vector<Tree>& trees) {
  std::ifstream in = open(path);
  return read_entities(in, path, trees);
}

}  // namespace entichart
