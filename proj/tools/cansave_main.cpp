// Command-line front-end for the cansave shared library. Everything goes
// through the C API in cansave.h; exit codes mirror its status codes
// (0 ok, 1 runtime failure, 2 usage/config error).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cansave.h"

namespace {

constexpr const char* kConfigEnvVar = "CANSAVE_CONFIG";

struct StageOptions {
  std::string config;
  bool force = false;
  int threads = 0;  // 0 = keep config value
  std::string out_dir;
  long long seed = -1;
};

// Flag overrides are merged over the config file as a JSON patch.
std::string overrides_json(const StageOptions& opt) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  if (!opt.out_dir.empty()) {
    os << "\"paths\":{\"out_dir\":\"" << opt.out_dir << "\"}";
    first = false;
  }
  if (opt.seed >= 0) {
    if (!first) os << ',';
    os << "\"seed\":" << opt.seed;
    first = false;
  }
  os << '}';
  return first ? std::string() : os.str();
}

int report_status(int status) {
  if (status != CANSAVE_OK) std::cerr << "error: " << cansave_last_error() << '\n';
  return status;
}

void add_stage_options(CLI::App* cmd, StageOptions& opt) {
  cmd->add_option("--config,-c", opt.config, "run config JSON (or $CANSAVE_CONFIG)")
      ->envname(kConfigEnvVar);
  cmd->add_flag("--force", opt.force, "overwrite existing stage outputs");
  cmd->add_option("--threads", opt.threads, "cap worker threads (1 = fully deterministic)");
  cmd->add_option("--out", opt.out_dir, "override paths.out_dir");
  cmd->add_option("--seed", opt.seed, "override the run seed");
}

int run_stage_command(const std::string& stage, const StageOptions& opt) {
  if (opt.config.empty()) {
    std::cerr << "error: no config given (use --config or set $" << kConfigEnvVar << ")\n";
    return CANSAVE_ERR_CONFIG;
  }
  const auto patch = overrides_json(opt);
  return report_status(cansave_run_stage(stage.c_str(), opt.config.c_str(),
                                         patch.empty() ? nullptr : patch.c_str(),
                                         opt.force ? 1 : 0, opt.threads));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cancer-risk ranking pipeline over event-stream EHR data"};
  app.require_subcommand(1);

  // generate
  std::string gen_spec, gen_out;
  auto* gen = app.add_subcommand("generate", "generate a synthetic corpus + truth files");
  gen->add_option("--spec", gen_spec, "population spec JSON")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  // per-stage subcommands
  StageOptions stage_opt;
  std::vector<CLI::App*> stage_cmds;
  const std::pair<const char*, const char*> stages[] = {
      {"split", "stratified split + homogeneity tests"},
      {"fit-survival", "fit Kaplan-Meier curves and the AFT regression"},
      {"featurize", "build feature matrices for train/validate/test"},
      {"train", "train the gradient-boosted classifier (and ablation)"},
      {"evaluate", "ranking metrics, intervals, importances"},
      {"retro", "retrospective TOP-k screening experiment"},
      {"report", "assemble a human-readable report"},
  };
  for (const auto& [name, help] : stages) {
    auto* cmd = app.add_subcommand(name, help);
    add_stage_options(cmd, stage_opt);
    stage_cmds.push_back(cmd);
  }

  auto* pipe = app.add_subcommand("pipeline", "run split through evaluate in order");
  add_stage_options(pipe, stage_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : CANSAVE_ERR_CONFIG;
  }

  if (gen->parsed()) {
    return report_status(cansave_generate(gen_spec.c_str(), gen_out.c_str()));
  }
  for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
    if (!stage_cmds[i]->parsed()) continue;
    const std::string name = stages[i].first;
    const int status = run_stage_command(name, stage_opt);
    if (status == CANSAVE_OK && name == "report") {
      // Print the assembled report for convenience.
      std::string out_dir = stage_opt.out_dir;
      if (out_dir.empty()) {
        std::ifstream cfg(stage_opt.config);
        try {
          const auto doc = nlohmann::json::parse(cfg);
          out_dir = doc.at("paths").value("out_dir", "out");
        } catch (const nlohmann::json::exception&) {
          out_dir.clear();
        }
      }
      std::ifstream report(out_dir + "/report.txt");
      if (report) std::cout << report.rdbuf();
    }
    return status;
  }
  if (pipe->parsed()) {
    if (stage_opt.config.empty()) {
      std::cerr << "error: no config given (use --config or set $" << kConfigEnvVar << ")\n";
      return CANSAVE_ERR_CONFIG;
    }
    const auto patch = overrides_json(stage_opt);
    return report_status(cansave_pipeline(stage_opt.config.c_str(),
                                          patch.empty() ? nullptr : patch.c_str(),
                                          stage_opt.force ? 1 : 0, stage_opt.threads));
  }
  return CANSAVE_ERR_CONFIG;
}
