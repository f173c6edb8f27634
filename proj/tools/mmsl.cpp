// Command-line front end: every library operation behind one subcommand,
// with deterministic byte-for-byte output for fixed inputs and seeds.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mmsl/mmsl.hpp"

namespace {

using namespace mmsl;

enum ExitStatus : int {
  kOk = 0,
  kUsageError = 1,
  kDataError = 2,
  kNumericFailure = 3,
};

/// CLI-level misuse that CLI11 cannot catch on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string out;
  std::string format = "report";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string config_path;
  std::string timestamp;
};

/// Writes to --out when given, stdout otherwise.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw ParseError("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<RunRecord> read_registry(const std::string& path) {
  if (path == "-") return load_registry(std::cin);
  return load_registry(path);
}

TrainingCurve read_curve(const std::string& path) {
  if (path == "-") return load_curve(std::cin);
  return load_curve(path);
}

std::vector<double> parse_quantity_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(parse_quantity(item));
  }
  if (values.empty()) throw UsageError("empty list '" + text + "'");
  return values;
}

std::vector<std::uint64_t> parse_count_list(const std::string& text) {
  std::vector<std::uint64_t> counts;
  for (double v : parse_quantity_list(text)) {
    if (!(v > 0.0)) throw UsageError("counts must be positive: '" + text + "'");
    counts.push_back(static_cast<std::uint64_t>(std::llround(v)));
  }
  return counts;
}

std::vector<double> logspace(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo)) throw UsageError("need 0 < min < max");
  if (points < 2) throw UsageError("need at least 2 grid points");
  std::vector<double> grid(points);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < points; ++i)
    grid[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
  return grid;
}

FitConfig resolve_fit_config(const GlobalOptions& global, std::optional<double> delta,
                             std::optional<int> max_iter, std::optional<double> tol) {
  FitConfig config;
  if (!global.config_path.empty()) config = load_fit_config(global.config_path);
  if (delta) config.huber_delta = *delta;
  if (max_iter) config.max_iterations = *max_iter;
  if (tol) config.gradient_tolerance = *tol;
  validate(config);
  return config;
}

NoiseSpec make_noise(double sigma, std::uint64_t seed) {
  NoiseSpec noise;
  if (sigma > 0.0) {
    noise.kind = NoiseKind::lognormal_multiplicative;
    noise.sigma = sigma;
    noise.seed = seed;
  }
  return noise;
}

void emit_law_document(const LawDocument& doc, const GlobalOptions& global) {
  OutputTarget target(global.out);
  save_law(doc, target.stream());
}

// --- subcommand bodies ------------------------------------------------------

void cmd_fit_uni(const GlobalOptions& global, const std::string& runs_path,
                 std::optional<double> delta, std::optional<int> max_iter,
                 std::optional<double> tol) {
  const auto runs = read_registry(runs_path);
  const FitConfig config = resolve_fit_config(global, delta, max_iter, tol);
  auto [law, report] = fit_unimodal(runs, config, global.threads);
  if (exceeds_exponent_bound(law))
    std::cerr << "note: fitted exponents exceed the 1/2 efficiency bound\n";
  LawDocument doc;
  doc.parameters = law;
  doc.fit_report = report;
  doc.created_at = global.timestamp;
  for (const auto& r : runs) doc.source_run_ids.push_back(r.run_id);
  emit_law_document(doc, global);
}

void cmd_fit_bi(const GlobalOptions& global, const std::string& runs_path,
                const std::string& law_i_path, const std::string& law_j_path,
                std::optional<double> delta, std::optional<int> max_iter,
                std::optional<double> tol) {
  const auto runs = read_registry(runs_path);
  const LawDocument doc_i = load_law(law_i_path);
  const LawDocument doc_j = load_law(law_j_path);
  if (!doc_i.is_unimodal() || !doc_j.is_unimodal())
    throw ParseError("fit-bi needs two unimodal law documents");
  const FitConfig config = resolve_fit_config(global, delta, max_iter, tol);
  auto [law, report] =
      fit_bimodal(runs, doc_i.unimodal(), doc_j.unimodal(), config, global.threads);
  if (exceeds_exponent_bound(law.alpha, law.beta))
    std::cerr << "note: fitted exponents exceed the 1/2 efficiency bound\n";
  LawDocument doc;
  doc.parameters = law;
  doc.fit_report = report;
  doc.created_at = global.timestamp;
  for (const auto& r : runs) doc.source_run_ids.push_back(r.run_id);
  emit_law_document(doc, global);
}

void cmd_eval(const GlobalOptions& global, const std::string& law_path,
              const std::string& n_text, const std::string& d_text,
              const std::string& di_text, const std::string& dj_text) {
  const LawDocument doc = load_law(law_path);
  const double n = parse_quantity(n_text);
  double value = 0.0;
  if (doc.is_unimodal()) {
    if (d_text.empty()) throw UsageError("eval on a unimodal law needs --d");
    value = eval_unimodal(doc.unimodal(), n, parse_quantity(d_text));
  } else if (!di_text.empty() || !dj_text.empty()) {
    if (di_text.empty() || dj_text.empty())
      throw UsageError("eval on a bimodal law needs both --di and --dj");
    value = eval_bimodal(doc.bimodal(), n, parse_quantity(di_text),
                         parse_quantity(dj_text));
  } else {
    if (d_text.empty()) throw UsageError("eval on a bimodal law needs --d or --di/--dj");
    const double half = 0.5 * parse_quantity(d_text);
    value = eval_bimodal(doc.bimodal(), n, half, half);
  }
  OutputTarget target(global.out);
  target.stream() << format_full(value) << "\n";
}

std::vector<double> read_loss_list(const std::string& inline_list,
                                   const std::string& file_path) {
  if (!inline_list.empty()) return parse_quantity_list(inline_list);
  if (file_path.empty()) throw UsageError("need an inline list or a file of losses");
  std::ifstream in(file_path);
  if (!in) throw ParseError("cannot open '" + file_path + "'");
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  if (values.empty()) throw ParseError("no losses in '" + file_path + "'");
  return values;
}

void cmd_membership(const GlobalOptions& global, const std::string& losses_i,
                    const std::string& losses_i_file, const std::string& losses_j,
                    const std::string& losses_j_file, double sigma) {
  const auto li = read_loss_list(losses_i, losses_i_file);
  const auto lj = read_loss_list(losses_j, losses_j_file);
  const bool member = membership_test(li, lj, sigma);
  OutputTarget target(global.out);
  target.stream() << "member: " << (member ? "true" : "false") << "\n";
}

const BimodalLaw& require_bimodal(const LawDocument& doc) {
  if (doc.is_unimodal())
    throw ParseError("this command needs a bimodal law document");
  return doc.bimodal();
}

void cmd_classify(const GlobalOptions& global, const std::string& law_path,
                  const std::string& n_text, const std::string& d_text) {
  const LawDocument doc = load_law(law_path);
  const SynergyVerdict verdict =
      classify(require_bimodal(doc), parse_quantity(n_text), parse_quantity(d_text));
  OutputTarget target(global.out);
  if (global.format == "csv") {
    target.stream() << "regime,margin,ratio\n"
                    << to_string(verdict.regime) << "," << format_full(verdict.margin)
                    << "," << format_full(verdict.ratio) << "\n";
  } else {
    target.stream() << "regime: " << to_string(verdict.regime) << "\n"
                    << "margin: " << format_full(verdict.margin) << "\n"
                    << "ratio: " << format_full(verdict.ratio) << "\n";
  }
}

void cmd_barrier(const GlobalOptions& global, const std::string& law_path,
                 const std::string& d_min, const std::string& d_max, int points) {
  const LawDocument doc = load_law(law_path);
  const auto grid = logspace(parse_quantity(d_min), parse_quantity(d_max), points);
  const auto curve = barrier_curve(require_bimodal(doc), grid);
  OutputTarget target(global.out);
  std::vector<std::vector<double>> rows;
  rows.reserve(curve.size());
  for (const auto& p : curve) rows.push_back({p.n, p.d_total});
  write_csv(target.stream(), {"n", "d_total"}, rows);
}

void cmd_optimal(const GlobalOptions& global, const std::string& law_path,
                 const std::string& solution_path) {
  const LawDocument doc = load_law(law_path);
  const BarrierSolution solution = compute_optimal(require_bimodal(doc));
  if (!solution_path.empty()) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "barrier_solution";
    j["created_at"] = global.timestamp;
    j["optimal_n"] = solution.optimal_n;
    j["optimal_d"] = solution.optimal_d;
    j["optimal_flops"] = solution.optimal_flops;
    json curve = json::array();
    for (const auto& p : solution.curve) curve.push_back({p.n, p.d_total});
    j["curve"] = curve;
    std::ofstream out(solution_path);
    if (!out) throw ParseError("cannot open '" + solution_path + "' for writing");
    out << j.dump(2) << "\n";
  }
  OutputTarget target(global.out);
  if (global.format == "csv") {
    std::vector<std::vector<double>> rows;
    rows.reserve(solution.curve.size());
    for (const auto& p : solution.curve) rows.push_back({p.n, p.d_total});
    write_csv(target.stream(), {"n", "d_total"}, rows);
  } else {
    target.stream() << "optimal_n: " << format_full(solution.optimal_n) << "\n"
                    << "optimal_d: " << format_full(solution.optimal_d) << "\n"
                    << "optimal_flops: " << format_full(solution.optimal_flops) << "\n";
  }
}

void cmd_ratio(const GlobalOptions& global, const std::string& law_path,
               const std::string& n_text, const std::string& d_min,
               const std::string& d_max, int points) {
  const LawDocument doc = load_law(law_path);
  const BimodalLaw& law = require_bimodal(doc);
  const auto schedule = logspace(parse_quantity(d_min), parse_quantity(d_max), points);
  const auto curve = synergy_ratio_curve(law.law_i, law.law_j, law,
                                         parse_quantity(n_text), schedule);
  OutputTarget target(global.out);
  std::vector<std::vector<double>> rows;
  rows.reserve(curve.size());
  for (const auto& [d, ratio] : curve) rows.push_back({d, ratio});
  write_csv(target.stream(), {"d_total", "ratio"}, rows);
}

void cmd_flatness(const GlobalOptions& global, const std::string& curve_path,
                  const std::string& modality, std::int64_t warmup, int window,
                  std::int64_t lookahead, double rel_tol) {
  const TrainingCurve curve = read_curve(curve_path);
  const FlatnessResult result =
      detect_flatness(curve, modality, warmup, window, lookahead, rel_tol);
  OutputTarget target(global.out);
  if (global.format == "csv") {
    std::vector<std::vector<double>> rows;
    rows.reserve(result.segments.size());
    for (const auto& [s, e] : result.segments)
      rows.push_back({static_cast<double>(s), static_cast<double>(e)});
    write_csv(target.stream(), {"start_step", "end_step"}, rows);
  } else {
    target.stream() << "flat_fraction: " << format_full(result.flat_fraction) << "\n"
                    << "segments: " << result.segments.size() << "\n"
                    << "warmup_steps_excluded: " << result.warmup_steps_excluded << "\n";
    for (const auto& [s, e] : result.segments)
      target.stream() << "segment: " << s << " " << e << "\n";
  }
}

void cmd_spikes(const GlobalOptions& global, const std::string& curve_path, int window,
                double factor) {
  const TrainingCurve curve = read_curve(curve_path);
  const SpikeResult result = count_spikes(curve, window, factor);
  OutputTarget target(global.out);
  if (global.format == "csv") {
    std::vector<std::vector<double>> rows;
    rows.reserve(result.spike_steps.size());
    for (auto s : result.spike_steps) rows.push_back({static_cast<double>(s)});
    write_csv(target.stream(), {"step"}, rows);
  } else {
    target.stream() << "count: " << result.count << "\n";
    for (auto s : result.spike_steps) target.stream() << "spike_step: " << s << "\n";
  }
}

void cmd_batch(const GlobalOptions& global, const std::string& runs_path) {
  const auto runs = read_registry(runs_path);
  OutputTarget target(global.out);
  target.stream() << "optimal_batch: " << optimal_batch(runs) << "\n";
}

void cmd_restarts(const GlobalOptions& global, const std::string& curve_path,
                  const std::string& tokens_per_check, double lr_factor) {
  const TrainingCurve curve = read_curve(curve_path);
  const auto events = restart_monitor(
      curve, static_cast<std::int64_t>(parse_quantity(tokens_per_check)), lr_factor);
  OutputTarget target(global.out);
  if (global.format == "csv") {
    std::vector<std::vector<double>> rows;
    rows.reserve(events.size());
    for (const auto& e : events)
      rows.push_back({static_cast<double>(e.step), static_cast<double>(e.tokens_seen),
                      e.new_lr_multiplier});
    write_csv(target.stream(), {"step", "tokens_seen", "new_lr_multiplier"}, rows);
  } else {
    target.stream() << "events: " << events.size() << "\n";
    for (const auto& e : events)
      target.stream() << "restart: step=" << e.step << " tokens_seen=" << e.tokens_seen
                      << " new_lr_multiplier=" << format_full(e.new_lr_multiplier)
                      << "\n";
  }
}

void cmd_correlate(const GlobalOptions& global, const std::string& manifest_path,
                   const PhenomenaConfig& cfg) {
  std::ifstream in(manifest_path);
  if (!in) throw ParseError("cannot open '" + manifest_path + "'");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_array()) throw ParseError("manifest must be a JSON array");

  std::vector<PairObservations> observations;
  for (const auto& entry : manifest) {
    PairObservations obs;
    const LawDocument doc = load_law(entry.at("law").get<std::string>());
    obs.law = require_bimodal(doc);
    obs.curve = load_curve(entry.at("curve").get<std::string>());
    const auto& np = entry.at("n_params");
    obs.n_params = np.is_string() ? parse_quantity(np.get<std::string>())
                                  : np.get<double>();
    obs.batch_sweep_pair = load_registry(entry.at("batch_pair").get<std::string>());
    obs.batch_sweep_i = load_registry(entry.at("batch_i").get<std::string>());
    obs.batch_sweep_j = load_registry(entry.at("batch_j").get<std::string>());
    observations.push_back(std::move(obs));
  }
  const auto reports = phenomena_report(std::move(observations), cfg);

  if (global.format == "csv") {
    if (global.out.empty())
      throw UsageError("correlate --format csv needs --out DIRECTORY");
    std::filesystem::create_directories(global.out);
    for (const auto& report : reports) {
      std::ofstream out(std::filesystem::path(global.out) /
                        (report.x_label + "_vs_" + report.y_label + ".csv"));
      std::vector<std::vector<double>> rows;
      rows.reserve(report.points.size());
      for (const auto& [x, y] : report.points) rows.push_back({x, y});
      write_csv(out, {report.x_label, report.y_label}, rows);
    }
    std::cout << "wrote " << reports.size() << " scatter files to " << global.out
              << "\n";
  } else {
    OutputTarget target(global.out);
    for (const auto& report : reports) {
      target.stream() << report.x_label << " vs " << report.y_label
                      << ": r=" << format_full(report.r)
                      << " n_points=" << report.n_points
                      << (report.degenerate ? " (degenerate)" : "") << "\n";
    }
  }
}

void cmd_synth_runs(const GlobalOptions& global, const std::string& law_path,
                    const std::string& n_grid_text, const std::string& d_grid_text,
                    double noise_sigma, const std::string& batch_text) {
  const LawDocument doc = load_law(law_path);
  const auto n_grid = parse_count_list(n_grid_text);
  const auto d_grid = parse_count_list(d_grid_text);
  const auto batch =
      static_cast<std::uint64_t>(std::llround(parse_quantity(batch_text)));
  const NoiseSpec noise = make_noise(noise_sigma, global.seed);
  const auto records =
      doc.is_unimodal()
          ? generate_unimodal(doc.unimodal(), n_grid, d_grid, noise, batch)
          : generate_bimodal(doc.bimodal(), n_grid, d_grid, noise, batch);
  OutputTarget target(global.out);
  save_registry(records, target.stream());
}

void cmd_synth_curve(const GlobalOptions& global, const std::string& law_path,
                     const std::string& n_text, std::int64_t steps,
                     const std::string& batch_text,
                     const std::vector<std::string>& flat_ranges,
                     const std::vector<std::int64_t>& spike_steps, double noise_sigma,
                     double spike_magnitude) {
  const LawDocument doc = load_law(law_path);
  if (!doc.is_unimodal()) throw UsageError("synth-curve needs a unimodal law");
  std::vector<std::pair<std::int64_t, std::int64_t>> flats;
  for (const auto& range : flat_ranges) {
    const auto colon = range.find(':');
    if (colon == std::string::npos)
      throw UsageError("flat range must look like START:END, got '" + range + "'");
    flats.emplace_back(std::stoll(range.substr(0, colon)),
                       std::stoll(range.substr(colon + 1)));
  }
  const NoiseSpec noise = make_noise(noise_sigma, global.seed);
  const TrainingCurve curve = generate_curve(
      doc.unimodal(), parse_quantity(n_text), steps,
      static_cast<std::int64_t>(std::llround(parse_quantity(batch_text))), flats,
      spike_steps, noise, spike_magnitude);
  OutputTarget target(global.out);
  save_curve(curve, target.stream());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaling-law toolkit: fit, evaluate and extrapolate unimodal and "
               "mixed-modal laws, and quantify training-dynamics phenomena"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--out", global.out, "output path (default: stdout)");
  app.add_option("--format", global.format, "output format: csv or report")
      ->check(CLI::IsMember({"csv", "report"}));
  app.add_option("--seed", global.seed, "seed for synthetic generation (64-bit)");
  app.add_option("--threads", global.threads,
                 "cap on worker threads, 0 = all hardware threads");
  app.add_option("--config", global.config_path, "fit configuration file (JSON)");
  app.add_option("--timestamp", global.timestamp,
                 "created_at value for written documents (default: empty)");

  // fit flags shared by fit-uni and fit-bi
  std::optional<double> opt_delta;
  std::optional<int> opt_max_iter;
  std::optional<double> opt_tol;

  std::string runs_path, law_path, law_i_path, law_j_path, curve_path, manifest_path;
  std::string n_text, d_text, di_text, dj_text, d_min, d_max, batch_text = "1M";
  std::string losses_i, losses_i_file, losses_j, losses_j_file;
  std::string solution_path, modality, tokens_per_check = "5e8";
  double sigma = 3.0, rel_tol = 1e-3, spike_factor = 2.0, lr_factor = 0.8;
  double noise_sigma = 0.0, spike_magnitude = 10.0;
  int points = 64, window = 51, spike_window = 101;
  std::int64_t warmup = 0, lookahead = 1000, steps = 1000;
  std::vector<std::string> flat_ranges;
  std::vector<std::int64_t> spike_steps;

  auto* fit_uni = app.add_subcommand("fit-uni", "fit a unimodal law from a run registry");
  fit_uni->add_option("runs", runs_path, "registry path, '-' for stdin")->required();
  fit_uni->add_option("--delta", opt_delta, "Huber threshold in log-loss nats (default 0.03)");
  fit_uni->add_option("--max-iterations", opt_max_iter, "optimizer iteration cap (default 1000)");
  fit_uni->add_option("--gradient-tolerance", opt_tol, "optimizer gradient tolerance (default 1e-8)");

  auto* fit_bi = app.add_subcommand("fit-bi", "fit a bimodal law from mixed-pair runs");
  fit_bi->add_option("runs", runs_path, "registry path, '-' for stdin")->required();
  fit_bi->add_option("--law-i", law_i_path, "unimodal law document for modality i")->required();
  fit_bi->add_option("--law-j", law_j_path, "unimodal law document for modality j")->required();
  fit_bi->add_option("--delta", opt_delta, "Huber threshold in log-loss nats (default 0.03)");
  fit_bi->add_option("--max-iterations", opt_max_iter, "optimizer iteration cap (default 1000)");
  fit_bi->add_option("--gradient-tolerance", opt_tol, "optimizer gradient tolerance (default 1e-8)");

  auto* eval = app.add_subcommand("eval", "evaluate a law document at a query point");
  eval->add_option("--law", law_path, "law document path")->required();
  eval->add_option("--n", n_text, "model size in parameters (M/B suffixes ok)")->required();
  eval->add_option("--d", d_text, "token count; bimodal laws split it 50/50");
  eval->add_option("--di", di_text, "tokens for modality i (bimodal only)");
  eval->add_option("--dj", dj_text, "tokens for modality j (bimodal only)");

  auto* membership = app.add_subcommand("membership", "test modality membership of two loss samples");
  membership->add_option("--losses-i", losses_i, "comma list of candidate-set losses under j's model (nats/token)");
  membership->add_option("--losses-i-file", losses_i_file, "file of losses, one per line");
  membership->add_option("--losses-j", losses_j, "comma list of j's own losses (nats/token)");
  membership->add_option("--losses-j-file", losses_j_file, "file of losses, one per line");
  membership->add_option("--sigma", sigma, "membership threshold sigma >= 1 (default 3)");

  auto* classify_cmd = app.add_subcommand("classify", "classify a point as synergy, competition or barrier");
  classify_cmd->add_option("--law", law_path, "bimodal law document")->required();
  classify_cmd->add_option("--n", n_text, "model size in parameters")->required();
  classify_cmd->add_option("--d", d_text, "total token count")->required();

  auto* barrier = app.add_subcommand("barrier", "sample the competition barrier as CSV");
  barrier->add_option("--law", law_path, "bimodal law document")->required();
  barrier->add_option("--d-min", d_min, "smallest total token count")->required();
  barrier->add_option("--d-max", d_max, "largest total token count")->required();
  barrier->add_option("--points", points, "log-spaced grid size (default 64)");

  auto* optimal = app.add_subcommand("optimal", "compute-optimal point on the barrier");
  optimal->add_option("--law", law_path, "bimodal law document")->required();
  optimal->add_option("--save-solution", solution_path, "also write the solution document (JSON)");

  auto* ratio = app.add_subcommand("ratio", "synergy ratio across a token schedule");
  ratio->add_option("--law", law_path, "bimodal law document")->required();
  ratio->add_option("--n", n_text, "model size in parameters")->required();
  ratio->add_option("--d-min", d_min, "smallest total token count")->required();
  ratio->add_option("--d-max", d_max, "largest total token count")->required();
  ratio->add_option("--points", points, "log-spaced schedule size (default 64)");

  auto* flatness = app.add_subcommand("flatness", "flat fraction of a modality's training curve");
  flatness->add_option("--curve", curve_path, "curve log path, '-' for stdin")->required();
  flatness->add_option("--modality", modality, "source modality to inspect")->required();
  flatness->add_option("--warmup", warmup, "steps to exclude as warm-up (default 0)");
  flatness->add_option("--window", window, "smoothing window in samples, odd (default 51)");
  flatness->add_option("--lookahead", lookahead, "lookahead in steps (default 1000)");
  flatness->add_option("--rel-tol", rel_tol, "relative decrease treated as progress (default 1e-3)");

  auto* spikes = app.add_subcommand("spikes", "count gradient-norm spikes in a curve");
  spikes->add_option("--curve", curve_path, "curve log path, '-' for stdin")->required();
  spikes->add_option("--window", spike_window, "rolling-median window, odd (default 101)");
  spikes->add_option("--factor", spike_factor, "spike threshold over the median (default 2)");

  auto* batch = app.add_subcommand("batch", "optimal batch size from a sweep registry");
  batch->add_option("runs", runs_path, "registry of runs differing only in batch size")->required();

  auto* restarts = app.add_subcommand("restarts", "replay the learning-rate restart policy");
  restarts->add_option("--curve", curve_path, "curve log path, '-' for stdin")->required();
  restarts->add_option("--tokens-per-check", tokens_per_check, "stall window in tokens (default 5e8)");
  restarts->add_option("--lr-factor", lr_factor, "learning-rate factor per restart (default 0.8)");

  auto* correlate = app.add_subcommand("correlate", "cross-pair phenomena correlation reports");
  correlate->add_option("--manifest", manifest_path, "JSON manifest of per-pair inputs")->required();
  correlate->add_option("--warmup", warmup, "flatness warm-up steps (default 0)");
  correlate->add_option("--window", window, "flatness smoothing window (default 51)");
  correlate->add_option("--lookahead", lookahead, "flatness lookahead in steps (default 1000)");
  correlate->add_option("--rel-tol", rel_tol, "flatness relative tolerance (default 1e-3)");
  correlate->add_option("--spike-window", spike_window, "spike median window (default 101)");
  correlate->add_option("--spike-factor", spike_factor, "spike threshold factor (default 2)");

  auto* synth_runs = app.add_subcommand("synth-runs", "generate a synthetic run registry from a law");
  synth_runs->add_option("--law", law_path, "law document to sample")->required();
  synth_runs->add_option("--n-grid", n_text, "comma list of model sizes (M/B ok)")
      ->default_val("8M,125M,350M,760M,1.3B,2.7B,6.7B");
  synth_runs->add_option("--d-grid", d_text, "comma list of token counts; totals for bimodal laws")
      ->default_val("5B,10B,100B");
  synth_runs->add_option("--noise-sigma", noise_sigma, "lognormal sigma, 0 = exact law values");
  synth_runs->add_option("--batch", batch_text, "batch size in tokens (default 1M)");

  auto* synth_curve = app.add_subcommand("synth-curve", "generate a synthetic training curve from a law");
  synth_curve->add_option("--law", law_path, "unimodal law document")->required();
  synth_curve->add_option("--n", n_text, "model size in parameters")->required();
  synth_curve->add_option("--steps", steps, "number of steps (default 1000)");
  synth_curve->add_option("--batch-tokens", batch_text, "tokens per step (default 1M)");
  synth_curve->add_option("--flat", flat_ranges, "planted flat segment START:END, repeatable");
  synth_curve->add_option("--spike", spike_steps, "planted spike step, repeatable");
  synth_curve->add_option("--noise-sigma", noise_sigma, "lognormal sigma, 0 = exact");
  synth_curve->add_option("--spike-magnitude", spike_magnitude, "grad norm at planted spikes (default 10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (app.got_subcommand(fit_uni))
      cmd_fit_uni(global, runs_path, opt_delta, opt_max_iter, opt_tol);
    else if (app.got_subcommand(fit_bi))
      cmd_fit_bi(global, runs_path, law_i_path, law_j_path, opt_delta, opt_max_iter,
                 opt_tol);
    else if (app.got_subcommand(eval))
      cmd_eval(global, law_path, n_text, d_text, di_text, dj_text);
    else if (app.got_subcommand(membership))
      cmd_membership(global, losses_i, losses_i_file, losses_j, losses_j_file, sigma);
    else if (app.got_subcommand(classify_cmd))
      cmd_classify(global, law_path, n_text, d_text);
    else if (app.got_subcommand(barrier))
      cmd_barrier(global, law_path, d_min, d_max, points);
    else if (app.got_subcommand(optimal))
      cmd_optimal(global, law_path, solution_path);
    else if (app.got_subcommand(ratio))
      cmd_ratio(global, law_path, n_text, d_min, d_max, points);
    else if (app.got_subcommand(flatness))
      cmd_flatness(global, curve_path, modality, warmup, window, lookahead, rel_tol);
    else if (app.got_subcommand(spikes))
      cmd_spikes(global, curve_path, spike_window, spike_factor);
    else if (app.got_subcommand(batch))
      cmd_batch(global, runs_path);
    else if (app.got_subcommand(restarts))
      cmd_restarts(global, curve_path, tokens_per_check, lr_factor);
    else if (app.got_subcommand(correlate)) {
      PhenomenaConfig cfg;
      cfg.warmup_steps = warmup;
      cfg.smooth_window = window;
      cfg.lookahead_steps = lookahead;
      cfg.rel_tol = rel_tol;
      cfg.spike_window = spike_window;
      cfg.spike_threshold = spike_factor;
      cmd_correlate(global, manifest_path, cfg);
    } else if (app.got_subcommand(synth_runs))
      cmd_synth_runs(global, law_path, n_text, d_text, noise_sigma, batch_text);
    else if (app.got_subcommand(synth_curve))
      cmd_synth_curve(global, law_path, n_text, steps, batch_text, flat_ranges,
                      spike_steps, noise_sigma, spike_magnitude);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
