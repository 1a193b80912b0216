// graphdpo command-line tool: dataset validation, DOT export, loss and
// gradient reports, the synthetic training harness and benchmarks.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "graphdpo/bench.hpp"
#include "graphdpo/errors.hpp"
#include "graphdpo/gradients.hpp"
#include "graphdpo/io.hpp"
#include "graphdpo/objective.hpp"
#include "graphdpo/pref_graph.hpp"
#include "graphdpo/synth_lab.hpp"
#include "graphdpo/warnings.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr double kGradTolerance = 1e-5;
constexpr const char* kConfigEnv = "GRAPHDPO_CONFIG";

using namespace graphdpo;

struct DataArgs {
  std::string path;
  bool skip_invalid = false;
  double tie_tolerance = 0.0;
};

struct WeightArgs {
  double beta = 0.05;
  std::optional<double> lambda_gt;
  std::int64_t step = 0;
  std::int64_t total_steps = 1;
  double kl_peak = 0.1;
  double kl_warmup_frac = 0.1;
};

struct TrainArgs {
  std::string task = "synth";
  std::string objective = "graphdpo";
  std::size_t prompts = 200;
  std::size_t responses = 16;
  std::size_t levels = 4;
  double noise = 0.0;
  std::uint64_t task_seed = 0;
  synth::TrainConfig config;
  std::string out;
};

void add_data_args(CLI::App* sub, DataArgs& d) {
  sub->add_option("data", d.path, "JSONL rollout file")->required();
  sub->add_flag("--skip-invalid", d.skip_invalid, "Skip malformed lines instead of failing");
  sub->add_option("--tie-tolerance", d.tie_tolerance,
                  "Preference labels within this distance share a class")
      ->check(CLI::NonNegativeNumber);
}

void add_weight_args(CLI::App* sub, WeightArgs& w) {
  sub->add_option("--beta", w.beta, "Inverse temperature of the log-ratio score")
      ->check(CLI::PositiveNumber);
  sub->add_option("--lambda-gt", w.lambda_gt,
                  "Initial anchoring weight (default K/4 per prompt); decays to min(1, X)");
  sub->add_option("--step", w.step, "Training step for the weight schedules");
  sub->add_option("--total-steps", w.total_steps, "Schedule length")->check(CLI::PositiveNumber);
  sub->add_option("--kl-peak", w.kl_peak, "Peak KL weight")->check(CLI::NonNegativeNumber);
  sub->add_option("--kl-warmup-frac", w.kl_warmup_frac, "Fraction of steps spent warming up KL");
}

void add_train_args(CLI::App* sub, TrainArgs& t) {
  auto& c = t.config;
  sub->add_option("--task", t.task, "Task family")->check(CLI::IsMember({"synth"}));
  sub->add_option("--prompts", t.prompts, "Number of synthetic prompts");
  sub->add_option("--responses", t.responses, "Candidate responses per prompt (M)");
  sub->add_option("--levels", t.levels, "Preference levels per prompt (G)");
  sub->add_option("--noise", t.noise, "Label noise added to utilities before binning");
  sub->add_option("--task-seed", t.task_seed, "Seed of the synthetic task");
  sub->add_option("--k", c.k, "Rollouts per prompt");
  sub->add_option("--temperature", c.temperature, "Sampling temperature");
  sub->add_option("--beta", c.beta, "Inverse temperature of the log-ratio score");
  sub->add_option("--steps", c.steps, "Optimizer steps");
  sub->add_option("--batch", c.batch_prompts, "Prompts per step");
  sub->add_option("--lr", c.learning_rate, "Peak learning rate");
  sub->add_option("--warmup-frac", c.warmup_frac, "Learning-rate warmup fraction");
  sub->add_option("--weight-decay", c.weight_decay, "Decoupled weight decay");
  sub->add_option("--gt-init", c.schedule.gt_init, "Initial anchoring weight");
  sub->add_option("--gt-final", c.schedule.gt_final, "Final anchoring weight");
  sub->add_option("--kl-peak", c.schedule.kl_peak, "Peak KL weight");
  sub->add_option("--kl-warmup-frac", c.schedule.kl_warmup_frac, "KL warmup fraction");
  sub->add_option("--seed", c.seed, "Training seed");
  sub->add_option("--eval-every", c.eval_every, "Metrics cadence in steps");
  sub->add_option("--threads", c.threads, "Worker threads for per-prompt work");
  sub->add_option("--out", t.out, "Write CSV here instead of stdout");
}

// Flat key=value file; keys are long flag names without dashes. Lines
// starting with '#' or ';' are comments.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidConfig(fmt::format("{}:{}: expected key=value", path, n));
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// Appends config values as flags for options the user did not pass, so that
// command-line flags always win.
std::vector<std::string> merge_config(const CLI::App& app, std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (!path)
    if (const char* env = std::getenv(kConfigEnv); env && *env) path = env;
  if (!path || args.empty()) return args;

  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands({}))
    if (s->get_name() == args[0]) sub = s;
  if (!sub) return args;

  for (const auto& [key, value] : read_config(*path)) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt) throw InvalidConfig("config key '" + key + "' is not a flag of '" + args[0] + "'");
    bool given = false;
    for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (given) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

std::vector<io::PromptProblem> load(const DataArgs& d, double beta) {
  const io::IngestResult in = io::ingest(std::filesystem::path(d.path), {d.skip_invalid});
  for (const auto& w : in.warnings) warn(w);
  std::vector<io::PromptProblem> out;
  for (const auto& r : in.records) out.push_back(io::prepare(r, beta, d.tie_tolerance));
  return out;
}

ScheduleParams schedule_for(const WeightArgs& w, std::size_t k) {
  ScheduleParams p = ScheduleParams::for_rollouts(k, w.total_steps);
  if (w.lambda_gt) {
    p.gt_init = *w.lambda_gt;
    p.gt_final = std::min(1.0, *w.lambda_gt);
  }
  p.kl_peak = w.kl_peak;
  p.kl_warmup_frac = w.kl_warmup_frac;
  return p;
}

int run_validate(const DataArgs& d) {
  const io::IngestResult in = io::ingest(std::filesystem::path(d.path), {d.skip_invalid});
  for (const auto& w : in.warnings) std::cout << "warning: " << w << '\n';
  bool ok = true;
  for (const auto& rec : in.records) {
    // Validation does not depend on beta; any positive value works here.
    const io::PromptProblem p = io::prepare(rec, 1.0, d.tie_tolerance);
    const ValidationReport report = validate(p.graph);
    std::cout << fmt::format("{}: K={} classes={} edges={} gt={} {}\n", p.prompt_id,
                             p.graph.num_nodes(), p.graph.num_classes(), p.graph.edge_count(),
                             p.gt_id ? *p.gt_id : "-", report.ok() ? "ok" : "INVALID");
    for (const auto& v : report.violations) std::cout << "  " << v << '\n';
    ok = ok && report.ok();
  }
  std::cout << fmt::format("{} record(s), {}\n", in.records.size(), ok ? "valid" : "invalid");
  return ok ? kExitOk : kExitFailure;
}

int run_graph(const DataArgs& d, const std::string& dot_path) {
  const auto problems = load(d, 1.0);
  const std::string dot = io::to_dot(problems);
  if (dot_path == "-") {
    std::cout << dot;
    return kExitOk;
  }
  std::ofstream out(dot_path);
  if (!out) throw InvalidInput("cannot write " + dot_path);
  out << dot;
  return kExitOk;
}

int run_loss(const DataArgs& d, const WeightArgs& w, const std::string& format) {
  const auto problems = load(d, w.beta);
  std::vector<LossBreakdown> rows;
  for (const auto& p : problems) {
    const ScheduleParams sched = schedule_for(w, p.scores.size());
    rows.push_back(total_loss(p.scores, p.graph, p.anchor_from_class, p.kl(), w.step, sched));
  }
  const double mean = batch_mean_total(rows);
  if (format == "csv") {
    std::cout << io::loss_csv_header() << '\n';
    for (std::size_t n = 0; n < rows.size(); ++n)
      std::cout << io::loss_csv_row(problems[n], rows[n]) << '\n';
    std::cout << "mean,,,,,,,,," << io::format_fixed(mean) << '\n';
  } else {
    std::cout << fmt::format("{:<16} {:>4} {:>7} {:>12} {:>12} {:>12} {:>10} {:>10} {:>12}\n",
                             "prompt", "K", "classes", "graph", "anchor", "kl", "lambda_gt",
                             "lambda_kl", "total");
    for (std::size_t n = 0; n < rows.size(); ++n) {
      const auto& r = rows[n];
      std::cout << fmt::format("{:<16} {:>4} {:>7} {:>12} {:>12} {:>12} {:>10} {:>10} {:>12}\n",
                               problems[n].prompt_id, problems[n].scores.size(),
                               problems[n].graph.num_classes(), io::format_fixed(r.graph_loss),
                               r.anchor_loss ? io::format_fixed(*r.anchor_loss) : "-",
                               io::format_fixed(r.kl_loss), io::format_fixed(r.lambda_gt),
                               io::format_fixed(r.lambda_kl), io::format_fixed(r.total));
    }
    std::cout << "mean total: " << io::format_fixed(mean) << '\n';
  }
  return kExitOk;
}

int run_gradcheck(const DataArgs& d, const WeightArgs& w, double h) {
  const auto problems = load(d, w.beta);
  double worst = 0.0;
  for (const auto& p : problems) {
    const ScheduleParams sched = schedule_for(w, p.scores.size());
    const LossWeights weights = weights_at(w.step, sched);
    const std::size_t k = p.scores.size();
    const bool has_gt = p.scores.gt_raw.has_value();

    std::vector<double> point = p.scores.raw;
    if (has_gt) point.push_back(*p.scores.gt_raw);
    auto f = [&](std::span<const double> x) {
      std::optional<double> gt;
      if (has_gt) gt = x[k];
      const ScoreSet s = center(x.first(k), gt);
      return total_loss(s, p.graph, p.anchor_from_class, std::nullopt, weights).total;
    };
    const GradientVector g = grad_total(p.scores, p.graph, p.anchor_from_class, {}, weights);
    std::vector<double> analytic = g.scores;
    if (has_gt) analytic.push_back(g.gt.value_or(0.0));
    const FiniteDiffReport rep = finite_diff_check(f, point, analytic, h);
    worst = std::max(worst, rep.max_rel_error);
    std::cout << fmt::format("{}: K={} max_rel_error={:.3e} (coordinate {})\n", p.prompt_id, k,
                             rep.max_rel_error, rep.worst_coordinate);
  }
  const bool ok = worst < kGradTolerance;
  std::cout << fmt::format("max relative error {:.3e} {} {:.0e}\n", worst, ok ? "<" : ">=",
                           kGradTolerance);
  return ok ? kExitOk : kExitFailure;
}

synth::ToyTask make_task(const TrainArgs& t) {
  return synth::gen_task(t.task_seed, t.prompts, t.responses, t.levels, t.noise);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
}

int run_train(TrainArgs& t) {
  t.config.objective = synth::parse_objective(t.objective);
  const synth::ToyTask task = make_task(t);
  const synth::TrainResult r = synth::train(task, t.config);
  std::string csv = synth::metrics_csv_header() + "\n";
  for (const auto& m : r.trajectory) csv += synth::metrics_csv_row(m) + "\n";
  write_output(t.out, csv);
  const auto reached = synth::steps_to_accuracy(r.trajectory, 0.95);
  const synth::Metrics& last = r.trajectory.back();
  std::cerr << fmt::format(
      "summary: objective={} steps={} final_top1={:.6f} final_tau={:.6f} final_kl={:.6f} "
      "steps_to_0.95={}\n",
      last.objective, last.step, last.top1_accuracy, last.kendall_tau, last.kl_to_reference,
      reached ? std::to_string(*reached) : "never");
  return kExitOk;
}

int run_sweep(TrainArgs& t, const std::vector<double>& grid) {
  const synth::ToyTask task = make_task(t);
  const auto rows = synth::sweep_lambda_gt(task, t.config, grid);
  write_output(t.out, synth::sweep_csv(rows));
  return kExitOk;
}

int run_bench(std::size_t k_max, int trials) {
  const auto sizes = doubling_sizes(k_max);
  if (sizes.empty()) throw InvalidConfig("--k-max must be at least 8");
  std::cout << scaling_table(benchmark_loss_scaling(sizes, 7, trials));
  return kExitOk;
}

int run_emit(const DataArgs& d) {
  const io::IngestResult in = io::ingest(std::filesystem::path(d.path), {d.skip_invalid});
  for (const auto& w : in.warnings) warn(w);
  io::write_jsonl(std::cout, in.records);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-structured preference optimization toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  // Handled before parsing; declared so it shows up in --help.
  std::string config_path;
  app.add_option("--config", config_path,
                 std::string("Flat key=value file of default flags (env: ") + kConfigEnv + ")");

  DataArgs data;
  WeightArgs weights;
  TrainArgs train_args;
  std::string dot_path, format = "table";
  double h = 1e-6;
  std::size_t k_max = 64;
  int trials = 7;
  std::vector<double> grid{0.0, 2.0, 8.0 / 3.0, 2.5, 8.0};

  auto* validate_cmd = app.add_subcommand("validate", "Ingest a dataset and validate every graph");
  add_data_args(validate_cmd, data);

  auto* graph_cmd = app.add_subcommand("graph", "Export preference graphs as DOT");
  add_data_args(graph_cmd, data);
  graph_cmd->add_option("--dot", dot_path, "Output path ('-' for stdout)")->required();

  auto* loss_cmd = app.add_subcommand("loss", "Per-prompt loss breakdown");
  add_data_args(loss_cmd, data);
  add_weight_args(loss_cmd, weights);
  loss_cmd->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the gradients");
  add_data_args(grad_cmd, data);
  add_weight_args(grad_cmd, weights);
  grad_cmd->set_help_flag("--help", "Print this help message and exit");
  grad_cmd->add_option("--h", h, "Central-difference step")->check(CLI::PositiveNumber);

  auto* train_cmd = app.add_subcommand("train", "Train a tabular policy on a synthetic task");
  add_train_args(train_cmd, train_args);
  train_cmd->add_option("--objective", train_args.objective,
                        "graphdpo, graphdpo+gt, dpo-pairwise, pro-listmle or multi-negative");

  auto* bench_cmd = app.add_subcommand("bench", "Time layered vs naive graph loss");
  bench_cmd->add_option("--k-max", k_max, "Largest K (powers of two from 8)");
  bench_cmd->add_option("--trials", trials, "Timed batches per measurement")
      ->check(CLI::PositiveNumber);

  auto* sweep_cmd = app.add_subcommand("sweep-gt", "Sweep the initial anchoring weight");
  add_train_args(sweep_cmd, train_args);
  sweep_cmd->add_option("--grid", grid, "Initial weights to try")->delimiter(',');

  auto* emit_cmd = app.add_subcommand("emit", "Re-emit a dataset in canonical JSONL");
  add_data_args(emit_cmd, data);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config(app, std::move(args));
  } catch (const graphdpo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes vectors from the back

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate_cmd) return run_validate(data);
    if (*graph_cmd) return run_graph(data, dot_path);
    if (*loss_cmd) return run_loss(data, weights, format);
    if (*grad_cmd) return run_gradcheck(data, weights, h);
    if (*train_cmd) return run_train(train_args);
    if (*bench_cmd) return run_bench(k_max, trials);
    if (*sweep_cmd) return run_sweep(train_args, grid);
    if (*emit_cmd) return run_emit(data);
  } catch (const graphdpo::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
