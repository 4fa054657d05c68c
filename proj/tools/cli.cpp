#include "cli.hpp"

#include "entichart/checkpoint.hpp"
#include "entichart/corpus.hpp"
#include "entichart/error.hpp"
#include "entichart/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>

namespace entichart::cli {
namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> entity_mode;
  std::optional<double> threshold;
  std::string split_mode = "left";
  bool json = false;

  std::string first, second, third;
  std::string log_path, resume_path;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string word_vectors;
};

RunConfig read_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ContractError(path + ": config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "model") value.get_to(rc.model);
      else if (key == "train") value.get_to(rc.train);
      else if (key == "word_vectors") rc.word_vectors = value.get<std::string>();
      else throw ContractError("unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(path + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(path + ": " + e.what());
  }
  return rc;
}

bool is_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[sizeof kCheckpointMagic] = {};
  in.read(magic, sizeof magic);
  return in.gcount() == sizeof magic && std::equal(magic, magic + sizeof magic, kCheckpointMagic);
}

EntityMode inference_mode(const Parser& p, const Options& o) {
  if (o.entity_mode) return parse_entity_mode(*o.entity_mode);
  return p.config().entity_indicators ? p.config().entity_mode : EntityMode::None;
}

double inference_threshold(const Parser& p, const Options& o) { return o.threshold.value_or(p.config().threshold); }

std::string evr_text(const EvrResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%9s %7s %7s %12s %10s\n%9s %7ld %7ld %12s %10ld\n", "EVR", "num_v", "num_s",
                "sent_EVR", "crossing", format_percent(r.evr).c_str(), r.num_v, r.num_s,
                format_percent(r.sentence_rate).c_str(), r.num_crossing);
  return buf;
}

std::string evr_json(const EvrResult& r) {
  nlohmann::ordered_json j;
  j["evr_percent"] = 100.0 * r.evr;
  j["num_v"] = r.num_v;
  j["num_s"] = r.num_s;
  j["sentence_evr_percent"] = 100.0 * r.sentence_rate;
  j["num_crossing"] = r.num_crossing;
  return j.dump();
}

std::vector<std::vector<EntitySpan>> entities_or_empty(const std::string& path, const std::vector<Tree>& trees) {
  if (path.empty()) return std::vector<std::vector<EntitySpan>>(trees.size());
  return read_entities_file(path, trees);
}

int cmd_prepare(const Options& o, std::ostream& out, std::ostream& err) {
  const std::vector<Tree> trees = read_trees_file(o.first);
  const auto entities = entities_or_empty(o.second, trees);
  std::vector<SentenceRecord> records;
  std::vector<EntityRecord> scored;
  long num_entities = 0;
  for (std::size_t k = 0; k < trees.size(); ++k) {
    records.push_back({trees[k].tokens(), trees[k], entities[k]});
    scored.emplace_back(trees[k], entities[k]);
    num_entities += static_cast<long>(entities[k].size());
  }
  write_corpus(out, records);
  err << o.first << ": " << trees.size() << " sentences\n";
  if (!o.second.empty()) err << o.second << ": " << num_entities << " entities\n";
  if (!trees.empty()) err << "gold EVR " << format_percent(evr(scored).evr) << "\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream&, std::ostream& err) {
  RunConfig rc = read_config(o.config_path);
  const std::vector<SentenceRecord> train_set = read_corpus_file(o.first);
  const std::vector<SentenceRecord> dev_set = o.second.empty() ? std::vector<SentenceRecord>{} : read_corpus_file(o.second);
  if (o.seed) rc.train.seed = *o.seed;

  std::optional<Parser> parser;
  TrainState state;
  if (!o.resume_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(o.resume_path);
    parser.emplace(parser_from_checkpoint(ckpt));
    state = train_state_from_checkpoint(ckpt);
    if (o.config_path.empty()) {
      if (auto saved = train_config_from_checkpoint(ckpt)) rc.train = *saved;
      if (o.seed) rc.train.seed = *o.seed;
    }
  } else {
    parser.emplace(Parser::from_corpus(train_set, rc.model, rc.train.seed));
    if (!rc.word_vectors.empty()) parser->encoder().load_word_vectors(rc.word_vectors);
  }

  const std::string log_path = o.log_path.empty() ? o.third + ".log.jsonl" : o.log_path;
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open log '" + log_path + "'");
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["lr"] = s.lr;
    j["loss_span"] = s.loss_span;
    j["loss_label"] = s.loss_label;
    j["loss_entity"] = s.loss_entity;
    j["loss"] = s.loss;
    log << j.dump() << '\n';
  };
  hooks.on_epoch = [&](const EpochLog& e) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["dev_f1"] = e.dev_f1;
    j["best_dev_f1"] = e.best_dev_f1;
    log << j.dump() << '\n';
    err << "epoch " << e.epoch << " dev F1 " << format_percent(e.dev_f1) << " best " << format_percent(e.best_dev_f1)
        << "\n";
  };
  const TrainResult result = train(*parser, train_set, dev_set, rc.train, hooks, o.resume_path.empty() ? nullptr : &state);
  save_checkpoint(o.third, make_checkpoint(*parser, &rc.train, &result.state));
  err << "wrote " << o.third << " after " << result.state.step << " steps\n";
  return 0;
}

int cmd_parse(const Options& o, std::ostream& out, std::ostream&) {
  const Parser parser = parser_from_checkpoint(load_checkpoint(o.first));
  const std::vector<SentenceRecord> records = read_corpus_file(o.second);
  for (const Tree& t : parse_all(parser, records, inference_mode(parser, o), inference_threshold(parser, o)))
    out << serialize_bracketed(t) << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  const std::vector<SentenceRecord> records = read_corpus_file(o.second);
  EvalReport report;
  if (is_checkpoint(o.first)) {
    const Parser parser = parser_from_checkpoint(load_checkpoint(o.first));
    report = evaluate(parser, records, inference_mode(parser, o), inference_threshold(parser, o));
  } else {
    const std::vector<Tree> predicted = read_trees_file(o.first);
    if (predicted.size() != records.size())
      throw ContractError(o.first + " has " + std::to_string(predicted.size()) + " trees but " + o.second + " has " +
                          std::to_string(records.size()) + " records");
    report = score_trees(records, predicted);
  }
  out << (o.json ? format_report_json(report) + "\n" : format_report_text(report));
  return 0;
}

int cmd_evr(const Options& o, std::ostream& out, std::ostream&) {
  const std::vector<Tree> trees = read_trees_file(o.first);
  const auto entities = read_entities_file(o.second, trees);
  std::vector<EntityRecord> records;
  for (std::size_t k = 0; k < trees.size(); ++k) records.emplace_back(trees[k], entities[k]);
  const EvrResult r = evr(records);
  out << (o.json ? evr_json(r) + "\n" : evr_text(r));
  return 0;
}

int cmd_binarize(const Options& o, std::ostream& out, std::ostream& err) {
  const std::vector<Tree> trees = read_trees_file(o.first);
  const auto entities = entities_or_empty(o.second, trees);
  const SplitMode mode = parse_split_mode(o.split_mode);
  long violations = 0;
  for (std::size_t k = 0; k < trees.size(); ++k) {
    const Tree b = binarize(trees[k], split_direction(mode, trees[k], entities[k]));
    violations += static_cast<long>(entity_violations(b, entities[k]).size());
    out << serialize_bracketed(b) << '\n';
  }
  err << trees.size() << " trees, " << violations << " entity violations\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entity-aware constituency parser", "entichart"};
  app.require_subcommand(1);
  Options o;

  auto* prepare = app.add_subcommand("prepare", "Merge a tree file and an entity file into corpus JSONL");
  prepare->add_option("trees", o.first, "One bracketed tree per line")->required();
  prepare->add_option("entities", o.second, "Entity JSONL aligned with the trees");

  auto* train = app.add_subcommand("train", "Train a parser and write a checkpoint");
  train->add_option("corpus", o.first, "Training corpus JSONL")->required();
  train->add_option("dev", o.second, "Development corpus JSONL")->required();
  train->add_option("out", o.third, "Checkpoint to write")->required();
  train->add_option("--config", o.config_path, "JSON with \"model\", \"train\" and \"word_vectors\" keys");
  train->add_option("--seed", o.seed, "Overrides train.seed");
  train->add_option("--log", o.log_path, "Training log (default OUT.log.jsonl)");
  train->add_option("--resume", o.resume_path, "Continue from a checkpoint");

  auto* parse = app.add_subcommand("parse", "Print one bracketed tree per input record");
  parse->add_option("checkpoint", o.first)->required();
  parse->add_option("corpus", o.second)->required();

  auto* eval = app.add_subcommand("eval", "Bracket P/R/F1 and EVR against gold trees");
  eval->add_option("source", o.first, "Checkpoint, or a file of predicted trees")->required();
  eval->add_option("corpus", o.second, "Gold corpus JSONL")->required();
  eval->add_flag("--json", o.json, "Emit a JSON object");

  for (CLI::App* sub : {parse, eval}) {
    sub->add_option("--entities", o.entity_mode, "gold|predicted|none")
        ->check(CLI::IsMember({"gold", "predicted", "none"}));
    sub->add_option("--threshold", o.threshold, "NER probability threshold (default 0.5)");
  }

  auto* evr_cmd = app.add_subcommand("evr", "Entity violating rate of gold trees");
  evr_cmd->add_option("trees", o.first)->required();
  evr_cmd->add_option("entities", o.second)->required();
  evr_cmd->add_flag("--json", o.json, "Emit a JSON object");

  auto* bin = app.add_subcommand("binarize", "Binarize trees");
  bin->add_option("trees", o.first)->required();
  bin->add_option("entities", o.second, "Entity JSONL, used by --mode entity");
  bin->add_option("--mode", o.split_mode, "left|right|entity")->check(CLI::IsMember({"left", "right", "entity"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*prepare) return cmd_prepare(o, out, err);
    if (*train) return cmd_train(o, out, err);
    if (*parse) return cmd_parse(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*evr_cmd) return cmd_evr(o, out, err);
    if (*bin) return cmd_binarize(o, out, err);
  } catch (const std::exception& e) {
    err << "entichart: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace entichart::cli
