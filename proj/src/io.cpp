#include "graphdpo/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "json.hpp"

namespace graphdpo::io {
namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line, const std::string& msg) { throw IngestError(line, msg); }

double number_at(const json& j, const std::string& path, std::size_t line) {
  if (!j.is_number()) fail(line, path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(line, path + ": must be finite");
  return v;
}

// Reads either `<model>_logprobs` (list) or `<model>_logprob` (scalar).
void read_model(const json& r, const std::string& base, const std::string& model,
                std::size_t line, std::optional<TokenLogProbs>& tokens, double& total) {
  const std::string list_key = model + "_logprobs";
  const std::string scalar_key = model + "_logprob";
  const bool has_list = r.contains(list_key);
  const bool has_scalar = r.contains(scalar_key);
  if (has_list && has_scalar)
    fail(line, base + ": " + list_key + " and " + scalar_key + " are mutually exclusive");
  if (!has_list && !has_scalar)
    fail(line, base + ": one of " + list_key + " or " + scalar_key + " is required");
  if (has_scalar) {
    total = number_at(r.at(scalar_key), base + "." + scalar_key, line);
    if (total > 0.0) fail(line, base + "." + scalar_key + ": log-probability must be <= 0");
    return;
  }
  const json& list = r.at(list_key);
  if (!list.is_array()) fail(line, base + "." + list_key + ": expected an array");
  if (list.empty()) fail(line, base + "." + list_key + ": token list is empty");
  TokenLogProbs t;
  for (std::size_t n = 0; n < list.size(); ++n) {
    const std::string path = base + "." + list_key + "[" + std::to_string(n) + "]";
    const double v = number_at(list[n], path, line);
    if (v > 0.0) fail(line, path + ": log-probability must be <= 0");
    t.push_back(v);
  }
  total = sequence_logprob(t);
  tokens = std::move(t);
}

}  // namespace

IngestError::IngestError(std::size_t line, const std::string& message)
    : InvalidInput(line ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

RolloutRecord parse_record(const std::string& json_line, std::size_t line) {
  json doc;
  try {
    doc = json::parse(json_line);
  } catch (const json::parse_error& e) {
    fail(line, std::string("parse error: ") + e.what());
  }
  if (!doc.is_object()) fail(line, "record must be a JSON object");

  RolloutRecord rec;
  rec.line = line;
  if (!doc.contains("prompt_id") || !doc["prompt_id"].is_string())
    fail(line, "prompt_id: required string");
  rec.prompt_id = doc["prompt_id"].get<std::string>();
  if (!doc.contains("responses") || !doc["responses"].is_array())
    fail(line, "responses: required array");
  const json& responses = doc["responses"];
  if (responses.empty()) fail(line, "responses: at least one response is required");

  std::vector<std::string> gt_ids;
  for (std::size_t n = 0; n < responses.size(); ++n) {
    const std::string base = "responses[" + std::to_string(n) + "]";
    const json& r = responses[n];
    if (!r.is_object()) fail(line, base + ": expected an object");
    ResponseRecord out;
    if (r.contains("id")) {
      if (!r["id"].is_string()) fail(line, base + ".id: expected a string");
      out.id = r["id"].get<std::string>();
    } else {
      out.id = std::to_string(n);
    }
    read_model(r, base, "policy", line, out.policy_tokens, out.policy_logprob);
    read_model(r, base, "ref", line, out.ref_tokens, out.ref_logprob);
    if (!r.contains("pref")) fail(line, base + ".pref: required number");
    out.pref = number_at(r["pref"], base + ".pref", line);
    if (r.contains("is_gt")) {
      if (!r["is_gt"].is_boolean()) fail(line, base + ".is_gt: expected a boolean");
      out.is_gt = r["is_gt"].get<bool>();
    }
    if (out.is_gt) gt_ids.push_back(out.id);
    rec.responses.push_back(std::move(out));
  }
  if (gt_ids.size() > 1) {
    std::string ids;
    for (std::size_t n = 0; n < gt_ids.size(); ++n) ids += (n ? ", " : "") + gt_ids[n];
    fail(line, "responses: at most one is_gt response allowed, found " + ids);
  }
  if (rec.responses.size() == gt_ids.size())
    fail(line, "responses: need at least one response that is not ground truth");
  return rec;
}

IngestResult ingest(std::istream& in, const IngestOptions& options) {
  IngestResult result;
  std::map<std::string, std::size_t> first_seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      RolloutRecord rec = parse_record(text, line);
      auto [it, inserted] = first_seen.emplace(rec.prompt_id, line);
      if (!inserted)
        result.warnings.push_back(fmt::format("line {}: duplicate prompt_id '{}' (first on line {})",
                                              line, rec.prompt_id, it->second));
      result.records.push_back(std::move(rec));
    } catch (const IngestError& e) {
      if (!options.skip_invalid) throw;
      result.warnings.push_back(std::string("skipped ") + e.what());
    }
  }
  if (result.records.empty()) throw IngestError(0, "input contains no records");
  return result;
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return ingest(in, options);
}

std::string emit_record(const RolloutRecord& record) {
  json responses = json::array();
  for (const ResponseRecord& r : record.responses) {
    json o;
    o["id"] = r.id;
    if (r.policy_tokens) o["policy_logprobs"] = *r.policy_tokens;
    else o["policy_logprob"] = r.policy_logprob;
    if (r.ref_tokens) o["ref_logprobs"] = *r.ref_tokens;
    else o["ref_logprob"] = r.ref_logprob;
    o["pref"] = r.pref;
    o["is_gt"] = r.is_gt;
    responses.push_back(std::move(o));
  }
  json doc;
  doc["prompt_id"] = record.prompt_id;
  doc["responses"] = std::move(responses);
  return doc.dump();
}

void write_jsonl(std::ostream& out, std::span<const RolloutRecord> records) {
  for (const auto& r : records) out << emit_record(r) << '\n';
}

std::vector<std::size_t> PromptProblem::token_counts() const {
  std::vector<std::size_t> out;
  for (const auto& t : policy_tokens) out.push_back(t.size());
  return out;
}

PromptProblem prepare(const RolloutRecord& record, double beta, double tie_tolerance) {
  std::vector<double> raw, labels;
  std::vector<std::string> ids;
  std::vector<TokenLogProbs> policy, ref;
  std::optional<double> gt_raw, gt_label;
  std::optional<std::string> gt_id;
  for (const ResponseRecord& r : record.responses) {
    const double s = log_ratio_score(r.policy_logprob, r.ref_logprob, beta);
    if (r.is_gt) {
      gt_raw = s;
      gt_label = r.pref;
      gt_id = r.id;
      continue;
    }
    raw.push_back(s);
    labels.push_back(r.pref);
    ids.push_back(r.id);
    TokenLogProbs p = r.policy_tokens.value_or(TokenLogProbs{r.policy_logprob});
    TokenLogProbs q = r.ref_tokens.value_or(TokenLogProbs{r.ref_logprob});
    if (p.size() != q.size()) {
      // Mixed forms cannot be aligned token by token; fall back to sequence totals.
      p = {r.policy_logprob};
      q = {r.ref_logprob};
    }
    policy.push_back(std::move(p));
    ref.push_back(std::move(q));
  }

  PreferenceLabeling labeling{labels, tie_tolerance};
  PreferenceGraph graph = build_from_labels(labeling);
  std::optional<std::size_t> anchor;
  if (gt_label) anchor = first_class_below(labeling, graph, *gt_label);
  return PromptProblem{record.prompt_id, std::move(ids), std::move(gt_id), std::move(labeling),
                       std::move(graph), center(raw, gt_raw), anchor, std::move(policy),
                       std::move(ref)};
}

std::string to_dot(std::span<const PromptProblem> problems) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::string out = "digraph preferences {\n  rankdir=TB;\n  node [shape=circle];\n";
  for (std::size_t p = 0; p < problems.size(); ++p) {
    const PromptProblem& pr = problems[p];
    const std::string prefix = "p" + std::to_string(p);
    out += fmt::format("  subgraph cluster_{} {{\n    label={};\n", prefix,
                       quote("prompt " + pr.prompt_id));
    if (pr.gt_id)
      out += fmt::format("    {}_gt [label={}, shape=doublecircle];\n", prefix,
                         quote("gt " + *pr.gt_id));
    for (std::size_t g = 0; g < pr.graph.num_classes(); ++g) {
      out += fmt::format("    subgraph cluster_{}_c{} {{\n      label={};\n", prefix, g,
                         quote("class " + std::to_string(g)));
      for (NodeIndex i : pr.graph.class_members(g))
        out += fmt::format("      {}_n{} [label={}];\n", prefix, i, quote(pr.response_ids[i]));
      out += "    }\n";
    }
    out += "  }\n";
    for (std::size_t g = 0; g + 1 < pr.graph.num_classes(); ++g)
      for (NodeIndex i : pr.graph.class_members(g))
        for (NodeIndex j : pr.graph.class_members(g + 1))
          out += fmt::format("  {}_n{} -> {}_n{};\n", prefix, i, prefix, j);
    if (pr.gt_id && pr.anchor_from_class && *pr.anchor_from_class < pr.graph.num_classes())
      for (NodeIndex j : pr.graph.class_members(*pr.anchor_from_class))
        out += fmt::format("  {}_gt -> {}_n{};\n", prefix, prefix, j);
  }
  out += "}\n";
  return out;
}

std::string format_fixed(double value) {
  if (std::isnan(value)) return "nan";
  return fmt::format("{:.6f}", value);
}

std::string loss_csv_header() {
  return "prompt_id,k,classes,contributing,graph_loss,anchor_loss,kl_loss,lambda_gt,lambda_kl,"
         "total";
}

std::string loss_csv_row(const PromptProblem& problem, const LossBreakdown& loss) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", problem.prompt_id, problem.scores.size(),
                     problem.graph.num_classes(), loss.contributing_nodes,
                     format_fixed(loss.graph_loss),
                     loss.anchor_loss ? format_fixed(*loss.anchor_loss) : std::string(""),
                     format_fixed(loss.kl_loss), format_fixed(loss.lambda_gt),
                     format_fixed(loss.lambda_kl), format_fixed(loss.total));
}

}  // namespace graphdpo::io
