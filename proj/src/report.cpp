#include "causalattr/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "causalattr/errors.hpp"

namespace causalattr {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json json_or_null(double value, bool present) {
  if (!present) return nullptr;
  return value;
}

ordered_json to_json_value(const AttributionReport& r) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["mode"] = r.mode;
  j["target"] = r.target;
  j["total"] = r.total;

  ordered_json nodes = ordered_json::array();
  for (const NodeAttribution& node : r.nodes) {
    ordered_json nj;
    nj["name"] = node.name;
    nj["phi"] = node.phi;
    nj["ci"] = node.has_ci ? ordered_json::array({node.ci_lo, node.ci_hi})
                           : ordered_json(nullptr);
    nj["p_value"] = json_or_null(node.p_value, node.has_p_value);
    nj["gated"] = node.gated;
    nj["mechanism_family"] = node.mechanism_family;
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);

  const Provenance& p = r.provenance;
  ordered_json pj;
  pj["functional"] = r.functional;
  pj["seed"] = p.seed;
  pj["gating"] = p.gating;
  pj["alpha"] = p.alpha;
  pj["detect_permutations"] = p.detect_permutations;
  pj["shapley_method"] = p.shapley_method;
  pj["shapley_permutations"] = p.shapley_permutations;
  pj["n_draws"] = p.n_draws;
  pj["evaluation_path"] = p.evaluation_path;
  pj["divergence_direction"] = p.divergence_direction;
  pj["bootstrap_resamples"] = p.bootstrap_resamples;
  pj["bootstrap_level"] = p.bootstrap_level;
  pj["rows_old"] = p.rows_old;
  pj["rows_new"] = p.rows_new;
  pj["raw_data_total"] = json_or_null(r.raw_data_total, r.has_raw_data_total);
  pj["efficiency_residual"] = r.efficiency_residual;

  ordered_json se = ordered_json(nullptr);
  ordered_json raw = ordered_json(nullptr);
  for (const NodeAttribution& node : r.nodes) {
    if (!node.has_std_error) continue;
    if (se.is_null()) {
      se = ordered_json::object();
      raw = ordered_json::object();
    }
    se[node.name] = node.std_error;
    raw[node.name] = node.raw_phi;
  }
  pj["shapley_std_errors"] = std::move(se);
  pj["shapley_raw_phi"] = std::move(raw);
  j["provenance"] = std::move(pj);
  return j;
}

std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string report_to_json(const AttributionReport& report) {
  return to_json_value(report).dump(2) + "\n";
}

AttributionReport report_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("bad report json: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion)
      throw InvalidArgument("unsupported report schema version");

    AttributionReport r;
    r.mode = j.at("mode").get<std::string>();
    r.target = j.at("target").get<std::string>();
    r.total = j.at("total").get<double>();

    for (const auto& nj : j.at("nodes")) {
      NodeAttribution node;
      node.name = nj.at("name").get<std::string>();
      node.phi = nj.at("phi").get<double>();
      node.raw_phi = node.phi;
      if (!nj.at("ci").is_null()) {
        node.ci_lo = nj.at("ci").at(0).get<double>();
        node.ci_hi = nj.at("ci").at(1).get<double>();
        node.has_ci = true;
      }
      if (!nj.at("p_value").is_null()) {
        node.p_value = nj.at("p_value").get<double>();
        node.has_p_value = true;
      }
      node.gated = nj.at("gated").get<bool>();
      node.mechanism_family = nj.at("mechanism_family").get<std::string>();
      r.nodes.push_back(std::move(node));
    }

    const auto& pj = j.at("provenance");
    r.functional = pj.at("functional").get<std::string>();
    r.provenance.seed = pj.at("seed").get<std::uint64_t>();
    r.provenance.gating = pj.at("gating").get<bool>();
    r.provenance.alpha = pj.at("alpha").get<double>();
    r.provenance.detect_permutations = pj.at("detect_permutations").get<std::size_t>();
    r.provenance.shapley_method = pj.at("shapley_method").get<std::string>();
    r.provenance.shapley_permutations = pj.at("shapley_permutations").get<std::size_t>();
    r.provenance.n_draws = pj.at("n_draws").get<std::size_t>();
    r.provenance.evaluation_path = pj.at("evaluation_path").get<std::string>();
    r.provenance.divergence_direction = pj.at("divergence_direction").get<std::string>();
    r.provenance.bootstrap_resamples = pj.at("bootstrap_resamples").get<std::size_t>();
    r.provenance.bootstrap_level = pj.at("bootstrap_level").get<double>();
    r.provenance.rows_old = pj.at("rows_old").get<std::size_t>();
    r.provenance.rows_new = pj.at("rows_new").get<std::size_t>();
    if (!pj.at("raw_data_total").is_null()) {
      r.raw_data_total = pj.at("raw_data_total").get<double>();
      r.has_raw_data_total = true;
    }
    r.efficiency_residual = pj.at("efficiency_residual").get<double>();
    if (!pj.at("shapley_std_errors").is_null()) {
      for (auto& node : r.nodes) {
        const auto& se = pj.at("shapley_std_errors");
        if (!se.contains(node.name)) continue;
        node.std_error = se.at(node.name).get<double>();
        node.raw_phi = pj.at("shapley_raw_phi").at(node.name).get<double>();
        node.has_std_error = true;
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("bad report json: ") + e.what());
  }
}

std::string report_to_csv(const AttributionReport& report) {
  std::string out = "node,phi,ci_lo,ci_hi,p_value,gated\n";
  for (const NodeAttribution& node : report.nodes) {
    out += csv_escape(node.name);
    out += ',';
    out += format_double(node.phi);
    out += ',';
    if (node.has_ci) out += format_double(node.ci_lo);
    out += ',';
    if (node.has_ci) out += format_double(node.ci_hi);
    out += ',';
    if (node.has_p_value) out += format_double(node.p_value);
    out += ',';
    out += node.gated ? '1' : '0';
    out += '\n';
  }
  return out;
}

void write_report(const AttributionReport& report, const std::string& path,
                  const std::string& format) {
  std::string body;
  if (format == "json") {
    body = report_to_json(report);
  } else if (format == "csv") {
    body = report_to_csv(report);
  } else {
    throw InvalidArgument("unknown report format '" + format + "'");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

AttributionReport read_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

}  // namespace causalattr
