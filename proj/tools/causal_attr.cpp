// Command-line front end: `attribute` runs change attribution on a pair of
// CSV samples over a known graph, `simulate` scores the method against
// synthetic models with known ground truth. Exit codes: 0 success, 2 bad
// inputs or flags, 3 failure while computing.
#include <charconv>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "causalattr/attribution.hpp"
#include "causalattr/errors.hpp"
#include "causalattr/graph.hpp"
#include "causalattr/report.hpp"
#include "causalattr/simulate.hpp"
#include "causalattr/tabular.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitFailed = 3;

bool is_input_error(const causalattr::Error& e) {
  return dynamic_cast<const causalattr::InvalidArgument*>(&e) != nullptr ||
         dynamic_cast<const causalattr::ParseError*>(&e) != nullptr ||
         dynamic_cast<const causalattr::UnknownNode*>(&e) != nullptr ||
         dynamic_cast<const causalattr::MissingColumn*>(&e) != nullptr ||
         dynamic_cast<const causalattr::TypeMismatch*>(&e) != nullptr ||
         dynamic_cast<const causalattr::SchemaMismatch*>(&e) != nullptr ||
         dynamic_cast<const causalattr::EmptyTable*>(&e) != nullptr ||
         dynamic_cast<const causalattr::InsufficientData*>(&e) != nullptr ||
         dynamic_cast<const causalattr::IncompatibleFamily*>(&e) != nullptr ||
         dynamic_cast<const causalattr::DuplicateNode*>(&e) != nullptr ||
         dynamic_cast<const causalattr::DanglingEdge*>(&e) != nullptr ||
         dynamic_cast<const causalattr::CycleDetected*>(&e) != nullptr ||
         dynamic_cast<const causalattr::IoError*>(&e) != nullptr;
}

causalattr::Family parse_family(const std::string& text) {
  if (text == "linear") return causalattr::Family::LinearGaussianConditional;
  if (text == "nearest_neighbor") return causalattr::Family::NearestNeighborConditional;
  throw causalattr::InvalidArgument("unknown regressor family '" + text +
                                    "' (expected linear or nearest_neighbor)");
}

void parse_shapley(const std::string& text, causalattr::AttributionConfig& cfg) {
  if (text == "exact") {
    cfg.shapley = causalattr::ShapleyMode::Exact;
    return;
  }
  const std::string prefix = "sampled:";
  if (text.compare(0, prefix.size(), prefix) == 0) {
    std::size_t n = 0;
    const char* first = text.c_str() + prefix.size();
    const char* last = text.c_str() + text.size();
    const auto res = std::from_chars(first, last, n);
    if (res.ec == std::errc() && res.ptr == last && n >= 2) {
      cfg.shapley = causalattr::ShapleyMode::Sampled;
      cfg.shapley_permutations = n;
      return;
    }
  }
  throw causalattr::InvalidArgument("bad --shapley value '" + text +
                                    "' (expected exact or sampled:N with N >= 2)");
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const char* first = item.c_str();
    const char* last = item.c_str() + item.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
      throw causalattr::InvalidArgument(std::string("bad ") + what + " list entry '" +
                                        item + "'");
    out.push_back(v);
  }
  if (out.empty())
    throw causalattr::InvalidArgument(std::string("empty ") + what + " list");
  return out;
}

std::pair<double, double> parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::vector<double> lo = parse_double_list(text.substr(0, colon), what);
    const std::vector<double> hi = parse_double_list(text.substr(colon + 1), what);
    if (lo.size() == 1 && hi.size() == 1) return {lo[0], hi[0]};
  }
  throw causalattr::InvalidArgument(std::string("bad ") + what + " range '" + text +
                                    "' (expected LO:HI)");
}

struct AttributeArgs {
  std::string graph_path;
  std::string old_path;
  std::string new_path;
  std::string mode;
  std::string target;
  std::string functional = "mean";
  std::string shapley = "exact";
  std::string family = "linear";
  std::string output;
  std::string format = "json";
  double alpha = 0.05;
  bool no_gating = false;
  bool reverse_kl = false;
  std::size_t draws = 100000;
  std::size_t bootstrap = 0;
  std::size_t detect_permutations = 500;
  double cpt_alpha = 1.0;
  int knn_k = 10;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

int run_attribute(const AttributeArgs& a) {
  const causalattr::Dag dag = causalattr::load_graph(a.graph_path);
  const causalattr::Table old_table = causalattr::load_csv(a.old_path, dag);
  const causalattr::Table new_table = causalattr::load_csv(a.new_path, dag);

  causalattr::AttributionConfig cfg;
  cfg.gating = !a.no_gating;
  cfg.detect.alpha = a.alpha;
  cfg.detect.n_permutations = a.detect_permutations;
  cfg.continuous_family = parse_family(a.family);
  cfg.fit.cpt_alpha = a.cpt_alpha;
  cfg.fit.knn_k = a.knn_k;
  cfg.n_draws = a.draws;
  cfg.reverse_kl = a.reverse_kl;
  cfg.bootstrap_resamples = a.bootstrap;
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  parse_shapley(a.shapley, cfg);

  causalattr::AttributionReport report;
  if (a.mode == "joint") {
    report = causalattr::attribute_joint(old_table, new_table, dag, cfg);
  } else {
    if (a.target.empty())
      throw causalattr::InvalidArgument("marginal mode needs --target");
    report = causalattr::attribute_marginal(old_table, new_table, dag,
                                            dag.index_of(a.target),
                                            causalattr::parse_functional(a.functional),
                                            cfg);
  }

  if (a.output.empty()) {
    std::cout << (a.format == "json" ? causalattr::report_to_json(report)
                                     : causalattr::report_to_csv(report));
  } else {
    causalattr::write_report(report, a.output, a.format);
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string config_path;
  std::string lambdas;
  std::string lambda_range;
  std::string sizes;
  std::string n_range;
  std::string mu_range;
  std::string family;
  std::string output;
  double change_prob = 0.5;
  std::size_t pairs = 20;
  std::size_t samples_per_pair = 5;
  std::size_t draws = 2000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

void apply_config_file(const std::string& path, causalattr::SimConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw causalattr::IoError("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw causalattr::ParseError(lineno, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "lambda") {
        cfg.lambdas = parse_double_list(value, "lambda");
      } else if (key == "lambda_range") {
        const auto r = parse_range(value, "lambda");
        cfg.lambdas.clear();
        cfg.lambda_lo = r.first;
        cfg.lambda_hi = r.second;
      } else if (key == "sizes") {
        cfg.sample_sizes.clear();
        for (double v : parse_double_list(value, "sizes"))
          cfg.sample_sizes.push_back(static_cast<std::size_t>(v));
      } else if (key == "n_range") {
        const auto r = parse_range(value, "n");
        cfg.n_min = static_cast<std::size_t>(r.first);
        cfg.n_max = static_cast<std::size_t>(r.second);
      } else if (key == "mu_range") {
        const auto r = parse_range(value, "mu");
        cfg.mu_lo = r.first;
        cfg.mu_hi = r.second;
      } else if (key == "change_prob") {
        cfg.change_prob = std::stod(value);
      } else if (key == "pairs") {
        cfg.n_scm_pairs = std::stoul(value);
      } else if (key == "samples_per_pair") {
        cfg.n_samples_per_pair = std::stoul(value);
      } else if (key == "family") {
        cfg.regressor = parse_family(value);
      } else if (key == "draws") {
        cfg.n_draws = std::stoul(value);
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else if (key == "workers") {
        cfg.workers = static_cast<unsigned>(std::stoul(value));
      } else {
        throw causalattr::ParseError(lineno, "unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw causalattr::ParseError(lineno, "bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw causalattr::ParseError(lineno, "value out of range for '" + key + "'");
    }
  }
}

int run_simulate(const SimulateArgs& a, const CLI::App& cmd) {
  causalattr::SimConfig cfg;
  if (!a.config_path.empty()) apply_config_file(a.config_path, cfg);

  // Flags override the config file.
  if (cmd.count("--lambda") > 0) cfg.lambdas = parse_double_list(a.lambdas, "lambda");
  if (cmd.count("--lambda-range") > 0) {
    const auto r = parse_range(a.lambda_range, "lambda");
    cfg.lambdas.clear();
    cfg.lambda_lo = r.first;
    cfg.lambda_hi = r.second;
  }
  if (cmd.count("--sizes") > 0) {
    cfg.sample_sizes.clear();
    for (double v : parse_double_list(a.sizes, "sizes"))
      cfg.sample_sizes.push_back(static_cast<std::size_t>(v));
  }
  if (cmd.count("--n-range") > 0) {
    const auto r = parse_range(a.n_range, "n");
    cfg.n_min = static_cast<std::size_t>(r.first);
    cfg.n_max = static_cast<std::size_t>(r.second);
  }
  if (cmd.count("--mu-range") > 0) {
    const auto r = parse_range(a.mu_range, "mu");
    cfg.mu_lo = r.first;
    cfg.mu_hi = r.second;
  }
  if (cmd.count("--change-prob") > 0) cfg.change_prob = a.change_prob;
  if (cmd.count("--pairs") > 0) cfg.n_scm_pairs = a.pairs;
  if (cmd.count("--samples-per-pair") > 0) cfg.n_samples_per_pair = a.samples_per_pair;
  if (cmd.count("--family") > 0) cfg.regressor = parse_family(a.family);
  if (cmd.count("--draws") > 0) cfg.n_draws = a.draws;
  if (cmd.count("--seed") > 0) cfg.seed = a.seed;
  if (cmd.count("--workers") > 0) cfg.workers = a.workers;

  const causalattr::SimResult result = causalattr::run_simulation(cfg);

  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["cells"] = nlohmann::ordered_json::array();
  for (const causalattr::SimCell& cell : result.cells) {
    nlohmann::ordered_json cj;
    cj["lambda_lo"] = cell.lambda_lo;
    cj["lambda_hi"] = cell.lambda_hi;
    cj["sample_size"] = cell.sample_size;
    cj["trials"] = cell.trials;
    cj["mean_l1"] = cell.mean_l1;
    cj["std_error"] = cell.std_error;
    j["cells"].push_back(std::move(cj));
  }
  nlohmann::ordered_json pj;
  pj["seed"] = cfg.seed;
  pj["pairs"] = cfg.n_scm_pairs;
  pj["samples_per_pair"] = cfg.n_samples_per_pair;
  pj["regressor"] = causalattr::family_name(cfg.regressor);
  pj["draws"] = cfg.n_draws;
  pj["n_min"] = cfg.n_min;
  pj["n_max"] = cfg.n_max;
  pj["mu_lo"] = cfg.mu_lo;
  pj["mu_hi"] = cfg.mu_hi;
  pj["change_prob"] = cfg.change_prob;
  j["provenance"] = std::move(pj);
  const std::string body = j.dump(2) + "\n";

  if (a.output.empty()) {
    std::cout << body;
  } else {
    std::ofstream out(a.output, std::ios::binary);
    if (!out) throw causalattr::IoError("cannot open '" + a.output + "' for writing");
    out << body;
    out.flush();
    if (!out) throw causalattr::IoError("failed writing '" + a.output + "'");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attributes changes between two observed samples to per-node "
               "causal mechanism changes in a known DAG"};
  app.require_subcommand(1);

  AttributeArgs at;
  CLI::App* attribute = app.add_subcommand(
      "attribute", "Attribute the change between two samples to graph nodes");
  attribute->add_option("--graph", at.graph_path, "Graph description file")->required();
  attribute->add_option("--old", at.old_path, "CSV sample from the old regime")->required();
  attribute->add_option("--new", at.new_path, "CSV sample from the new regime")->required();
  attribute->add_option("--mode", at.mode, "joint: per-node shares of the joint KL; "
                        "marginal: Shapley split of a target functional change")
      ->required()
      ->check(CLI::IsMember({"joint", "marginal"}));
  attribute->add_option("--target", at.target, "Target node (marginal mode)");
  attribute->add_option("--functional", at.functional,
                        "mean|variance|median|quantile:Q|kl (marginal mode)");
  attribute->add_option("--shapley", at.shapley, "exact or sampled:N");
  attribute->add_option("--alpha", at.alpha, "Change-test level")
      ->check(CLI::Range(0.0, 1.0));
  attribute->add_flag("--no-gating", at.no_gating,
                      "Treat every node as changed; skip the change tests");
  attribute->add_option("--draws", at.draws, "Draws per coalition on the sampling path");
  attribute->add_option("--bootstrap", at.bootstrap,
                        "Bootstrap resamples for per-node intervals (0 = off)");
  attribute->add_option("--seed", at.seed, "Master seed");
  attribute->add_option("--output", at.output, "Report path (default: stdout)");
  attribute->add_option("--format", at.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  attribute->add_option("--family", at.family,
                        "Regressor for continuous non-roots: linear or nearest_neighbor");
  attribute->add_option("--cpt-alpha", at.cpt_alpha, "CPT smoothing pseudo-count");
  attribute->add_option("--knn-k", at.knn_k, "Neighbor count for nearest_neighbor fits");
  attribute->add_option("--detect-permutations", at.detect_permutations,
                        "Permutations per change test");
  attribute->add_flag("--reverse-kl", at.reverse_kl,
                      "Joint mode: measure old-vs-new instead of new-vs-old");
  attribute->add_option("--workers", at.workers, "Worker threads");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Score attribution accuracy on synthetic models");
  simulate->add_option("--config", sim.config_path, "key=value config file");
  simulate->add_option("--lambda", sim.lambdas, "Fixed shift magnitudes, e.g. 1,2,3");
  simulate->add_option("--lambda-range", sim.lambda_range,
                       "Shift magnitude range LO:HI, drawn per model");
  simulate->add_option("--sizes", sim.sizes, "Sample sizes, e.g. 500,4000");
  simulate->add_option("--n-range", sim.n_range, "Node count range LO:HI");
  simulate->add_option("--mu-range", sim.mu_range, "Node mean range LO:HI");
  simulate->add_option("--change-prob", sim.change_prob,
                       "Per-node probability of receiving the shift");
  simulate->add_option("--pairs", sim.pairs, "Model pairs per cell");
  simulate->add_option("--samples-per-pair", sim.samples_per_pair,
                       "Dataset draws per model pair");
  simulate->add_option("--family", sim.family,
                       "Sink regressor: linear or nearest_neighbor");
  simulate->add_option("--draws", sim.draws, "Draws per coalition on the sampling path");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--output", sim.output, "Result path (default: stdout)");
  simulate->add_option("--workers", sim.workers, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (attribute->parsed()) return run_attribute(at);
    return run_simulate(sim, *simulate);
  } catch (const causalattr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_input_error(e) ? kExitBadInput : kExitFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}
