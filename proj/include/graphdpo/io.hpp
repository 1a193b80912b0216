#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphdpo/errors.hpp"
#include "graphdpo/objective.hpp"
#include "graphdpo/pref_graph.hpp"

namespace graphdpo::io {

/// One response as read from a JSONL line. Exactly one of the list/scalar
/// forms is present per model on the wire; after ingestion the scalar fields
/// always hold the sequence log-probability.
struct ResponseRecord {
  std::string id;
  std::optional<TokenLogProbs> policy_tokens;
  std::optional<TokenLogProbs> ref_tokens;
  double policy_logprob = 0.0;
  double ref_logprob = 0.0;
  double pref = 0.0;
  bool is_gt = false;
};

struct RolloutRecord {
  std::string prompt_id;
  std::vector<ResponseRecord> responses;
  std::size_t line = 0;  ///< 1-based source line, 0 when built in memory
};

/// Malformed JSON or a violated record invariant. `line` is 1-based.
class IngestError : public InvalidInput {
 public:
  IngestError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct IngestOptions {
  bool skip_invalid = false;
};

struct IngestResult {
  std::vector<RolloutRecord> records;
  std::vector<std::string> warnings;  ///< duplicates, skipped lines
};

/// Parses one JSON document into a record, validating every invariant.
RolloutRecord parse_record(const std::string& json_line, std::size_t line = 0);

/// Streams JSONL. Blank lines are ignored. Without skip_invalid the first bad
/// line throws IngestError; an input with no records is an error either way.
IngestResult ingest(std::istream& in, const IngestOptions& options = {});
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options = {});

/// Canonical single-line JSON for a record; ingest(emit(r)) reproduces r.
std::string emit_record(const RolloutRecord& record);
void write_jsonl(std::ostream& out, std::span<const RolloutRecord> records);

/// A record turned into objective inputs. The ground-truth response (if any)
/// is split off: it is not a graph node and does not enter the centering mean.
struct PromptProblem {
  std::string prompt_id;
  std::vector<std::string> response_ids;
  std::optional<std::string> gt_id;
  PreferenceLabeling labeling;
  PreferenceGraph graph;
  ScoreSet scores;
  std::optional<std::size_t> anchor_from_class;
  std::vector<TokenLogProbs> policy_tokens;  ///< scalar forms become one token
  std::vector<TokenLogProbs> ref_tokens;

  double kl() const { return kl_regularizer(policy_tokens, ref_tokens); }
  std::vector<std::size_t> token_counts() const;
};

/// Applies the log-ratio transform with `beta` (the only place beta enters).
PromptProblem prepare(const RolloutRecord& record, double beta, double tie_tolerance = 0.0);

/// DOT export: one cluster per prompt, one nested cluster per class, edges
/// drawn between consecutive classes only (the transitive reduction). The
/// ground-truth node is a doublecircle pointing at the first worse class.
std::string to_dot(std::span<const PromptProblem> problems);

/// Fixed six-decimal, locale-independent number formatting.
std::string format_fixed(double value);

std::string loss_csv_header();
std::string loss_csv_row(const PromptProblem& problem, const LossBreakdown& loss);

}  // namespace graphdpo::io
