#include "entichart/metrics.hpp"

#include "entichart/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <map>

namespace entichart {
namespace {

void collect_brackets(const Tree& t, bool is_root, std::vector<LabeledSpan>& out) {
  if (t.is_leaf() || t.is_preterminal()) return;
  if (!is_root) out.push_back({t.span(), t.label});
  for (const Tree& c : t.children) collect_brackets(c, false, out);
}

double safe_ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

std::vector<LabeledSpan> scored_brackets(const Tree& tree) {
  std::vector<LabeledSpan> out;
  collect_brackets(tree, true, out);
  return out;
}

BracketScore bracket_prf(const std::vector<Tree>& golds, const std::vector<Tree>& preds) {
  if (golds.size() != preds.size())
    throw ContractError("bracket_prf: " + std::to_string(golds.size()) + " gold trees vs " +
                        std::to_string(preds.size()) + " predicted");
  BracketScore s;
  for (std::size_t k = 0; k < golds.size(); ++k) {
    if (golds[k].num_tokens() != preds[k].num_tokens())
      throw ContractError("bracket_prf: sentence " + std::to_string(k + 1) + " has " +
                          std::to_string(golds[k].num_tokens()) + " gold tokens vs " +
                          std::to_string(preds[k].num_tokens()) + " predicted");
    std::map<LabeledSpan, long> gold_counts;
    for (LabeledSpan& ls : scored_brackets(golds[k])) ++gold_counts[std::move(ls)];
    const std::vector<LabeledSpan> pred = scored_brackets(preds[k]);
    s.pred_total += static_cast<long>(pred.size());
    for (const auto& [_, c] : gold_counts) s.gold_total += c;
    for (const LabeledSpan& ls : pred) {
      auto it = gold_counts.find(ls);
      if (it != gold_counts.end() && it->second > 0) {
        --it->second;
        ++s.matched;
      }
    }
  }
  s.precision = safe_ratio(s.matched, s.pred_total);
  s.recall = safe_ratio(s.matched, s.gold_total);
  s.f1 = (s.precision + s.recall) == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

EvrResult evr(const std::vector<EntityRecord>& records) {
  if (records.empty()) throw ContractError("evr: empty corpus");
  EvrResult r;
  for (const auto& [tree, entities] : records) {
    const long v = static_cast<long>(entity_violations(tree, entities).size());
    r.num_v += v;
    r.violating_sentences += v > 0 ? 1 : 0;
    r.num_crossing += static_cast<long>(entity_crossings(tree, entities).size());
  }
  r.num_s = static_cast<long>(records.size());
  r.evr = safe_ratio(r.num_v, r.num_s);
  r.sentence_rate = safe_ratio(r.violating_sentences, r.num_s);
  return r;
}

std::string format_percent(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string format_report_text(const EvalReport& report) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%9s %9s %9s %9s %7s %7s %12s\n"
                "%9s %9s %9s %9s %7ld %7ld %12s\n",
                "P", "R", "F1", "EVR", "num_v", "num_s", "sent_EVR", format_percent(report.precision()).c_str(),
                format_percent(report.recall()).c_str(), format_percent(report.f1()).c_str(),
                format_percent(report.entities.evr).c_str(), report.entities.num_v, report.entities.num_s,
                format_percent(report.entities.sentence_rate).c_str());
  return buf;
}

std::string format_report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["precision"] = report.precision();
  j["recall"] = report.recall();
  j["f1"] = report.f1();
  j["evr_percent"] = report.evr_percent();
  j["num_v"] = report.entities.num_v;
  j["num_s"] = report.entities.num_s;
  j["sentence_evr_percent"] = 100.0 * report.entities.sentence_rate;
  j["num_crossing"] = report.entities.num_crossing;
  return j.dump();
}

}  // namespace entichart
