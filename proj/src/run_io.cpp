#include "mmdflow/run_io.hpp"

#include <fstream>

#include "mmdflow/config.hpp"
#include "mmdflow/errors.hpp"
#include "mmdflow/numeric.hpp"

namespace mmdflow {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes everywhere
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void write_run_csv(const std::filesystem::path& path, const BuildReport& report) {
  auto out = open_out(path);
  out << "m,epsilon,mmd_sq,delta,delta1,delta2,lip_bound\n";
  for (const auto& row : report.rows) {
    out << row.m << ',' << format_double(row.epsilon) << ','
        << format_double(row.mmd_sq) << ',' << format_double(row.delta) << ','
        << format_double(row.delta1) << ',' << format_double(row.delta2) << ','
        << format_double(row.lip_bound) << '\n';
  }
}

nlohmann::json run_summary_json(const BuildReport& report) {
  return {{"blocks_used", report.blocks_used},
          {"schedule_blocks", report.schedule_blocks},
          {"initial_mmd_sq", report.initial_mmd_sq},
          {"final_mmd_sq", report.final_mmd_sq},
          {"achieved_ratio", report.achieved_ratio},
          {"target_delta", report.target_delta},
          {"target_met", report.target_met},
          {"schedule", report.schedule.to_json()}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

nlohmann::json flow_to_json(const ResidualFlow& flow) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& block : flow.blocks()) {
    nlohmann::json psi = nlohmann::json::array();
    for (Eigen::Index i = 0; i < block.witness().size(); ++i) {
      psi.push_back(hex_double(block.witness()(i)));
    }
    blocks.push_back({{"epsilon", hex_double(block.epsilon())},
                      {"psi", std::move(psi)}});
  }
  return {{"map", flow.map().to_json()}, {"blocks", std::move(blocks)}};
}

ResidualFlow flow_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("map") || !doc.contains("blocks")) {
    throw ConfigError("flow document needs 'map' and 'blocks'");
  }
  ResidualFlow flow(make_feature_map(doc.at("map")));
  for (const auto& bj : doc.at("blocks")) {
    if (!bj.contains("epsilon") || !bj.contains("psi")) {
      throw ConfigError("flow block needs 'epsilon' and 'psi'");
    }
    const double epsilon = parse_hex_double(bj.at("epsilon").get<std::string>());
    const auto& psi_json = bj.at("psi");
    Eigen::VectorXd witness(psi_json.size());
    for (std::size_t i = 0; i < psi_json.size(); ++i) {
      witness(static_cast<Eigen::Index>(i)) =
          parse_hex_double(psi_json[i].get<std::string>());
    }
    flow.append_block(epsilon, std::move(witness));
  }
  return flow;
}

void save_flow_json(const std::filesystem::path& path, const ResidualFlow& flow) {
  write_json(path, flow_to_json(flow));
}

ResidualFlow load_flow_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open flow file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("flow file is not valid JSON: " + std::string(e.what()));
  }
  return flow_from_json(doc);
}

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "delta,schedule,epsilon,n_predicted,n_used,initial_mmd_sq,"
         "final_mmd_sq,achieved_ratio,ok,error\n";
  for (const auto& r : rows) {
    out << format_double(r.delta) << ',' << r.schedule << ','
        << format_double(r.epsilon) << ',' << r.n_predicted << ',' << r.n_used
        << ',' << format_double(r.initial_mmd_sq) << ','
        << format_double(r.final_mmd_sq) << ','
        << format_double(r.achieved_ratio) << ',' << (r.ok ? 1 : 0) << ','
        << r.error << '\n';
  }
}

}  // namespace mmdflow
