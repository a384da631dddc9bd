#include "cansave.h"

#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cansave/error.hpp"
#include "cansave/gbdt.hpp"
#include "cansave/pipeline.hpp"
#include "cansave/survival.hpp"

namespace {

thread_local std::string g_last_error;

int guard(const std::function<void()>& body) {
  try {
    body();
    g_last_error.clear();
    return CANSAVE_OK;
  } catch (const cansave::ConfigError& e) {
    g_last_error = e.what();
    return CANSAVE_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CANSAVE_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return CANSAVE_ERR_RUNTIME;
  }
}

cansave::pipeline::RunConfig load_config(const char* config_path, const char* overrides_json,
                                         int threads) {
  if (config_path == nullptr) throw cansave::ConfigError("config path is null");
  nlohmann::ordered_json doc;
  {
    const auto text = [&] {
      std::ifstream in(config_path, std::ios::binary);
      if (!in)
        throw cansave::ConfigError(std::string("cannot open config file '") + config_path +
                                   "'");
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    }();
    try {
      doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw cansave::ConfigError(std::string("malformed run config: ") + e.what());
    }
  }
  if (overrides_json != nullptr && std::strlen(overrides_json) > 0) {
    nlohmann::ordered_json patch;
    try {
      patch = nlohmann::ordered_json::parse(overrides_json);
    } catch (const nlohmann::json::exception& e) {
      throw cansave::ConfigError(std::string("malformed overrides JSON: ") + e.what());
    }
    doc.merge_patch(patch);
  }
  auto cfg = cansave::pipeline::RunConfig::from_json_text(doc.dump());
  if (threads > 0) cfg.threads = threads;
  return cfg;
}

}  // namespace

extern "C" {

const char* cansave_version(void) { return "0.1.0"; }

const char* cansave_last_error(void) { return g_last_error.c_str(); }

int cansave_generate(const char* spec_json_path, const char* out_dir) {
  return guard([&] {
    if (spec_json_path == nullptr || out_dir == nullptr)
      throw cansave::ConfigError("cansave_generate: null argument");
    cansave::pipeline::cmd_generate(spec_json_path, out_dir);
  });
}

int cansave_run_stage(const char* stage, const char* config_json_path,
                      const char* overrides_json, int force, int threads) {
  return guard([&] {
    if (stage == nullptr) throw cansave::ConfigError("cansave_run_stage: stage is null");
    const auto cfg = load_config(config_json_path, overrides_json, threads);
    cansave::pipeline::run_stage(stage, cfg, force != 0);
  });
}

int cansave_pipeline(const char* config_json_path, const char* overrides_json, int force,
                     int threads) {
  return guard([&] {
    const auto cfg = load_config(config_json_path, overrides_json, threads);
    cansave::pipeline::run_pipeline(cfg, force != 0);
  });
}

struct cansave_aft {
  cansave::survival::AFTModel model;
};

int cansave_aft_load(const char* model_json_path, cansave_aft** out_model) {
  return guard([&] {
    if (model_json_path == nullptr || out_model == nullptr)
      throw cansave::ConfigError("cansave_aft_load: null argument");
    auto* handle = new cansave_aft{cansave::survival::aft_model_from_file(model_json_path)};
    *out_model = handle;
  });
}

int cansave_aft_n_covariates(const cansave_aft* model, size_t* out_n) {
  return guard([&] {
    if (model == nullptr || out_n == nullptr)
      throw cansave::ConfigError("cansave_aft_n_covariates: null argument");
    *out_n = model->model.beta.size();
  });
}

int cansave_aft_survival(const cansave_aft* model, double age_years,
                         const double* covariates, size_t n_covariates,
                         double* out_probability) {
  return guard([&] {
    if (model == nullptr || out_probability == nullptr ||
        (covariates == nullptr && n_covariates > 0))
      throw cansave::ConfigError("cansave_aft_survival: null argument");
    *out_probability = cansave::survival::aft_survival(
        model->model, age_years, std::span<const double>(covariates, n_covariates));
  });
}

void cansave_aft_free(cansave_aft* model) { delete model; }

struct cansave_gbdt {
  cansave::boosting::GBDTModel model;
};

int cansave_gbdt_load(const char* model_json_path, cansave_gbdt** out_model) {
  return guard([&] {
    if (model_json_path == nullptr || out_model == nullptr)
      throw cansave::ConfigError("cansave_gbdt_load: null argument");
    auto* handle = new cansave_gbdt{cansave::boosting::gbdt_from_file(model_json_path)};
    *out_model = handle;
  });
}

int cansave_gbdt_n_features(const cansave_gbdt* model, size_t* out_n) {
  return guard([&] {
    if (model == nullptr || out_n == nullptr)
      throw cansave::ConfigError("cansave_gbdt_n_features: null argument");
    *out_n = model->model.feature_names.size();
  });
}

int cansave_gbdt_predict(const cansave_gbdt* model, const double* features,
                         size_t n_features, double* out_probability) {
  return guard([&] {
    if (model == nullptr || out_probability == nullptr || features == nullptr)
      throw cansave::ConfigError("cansave_gbdt_predict: null argument");
    *out_probability =
        model->model.predict_risk(std::span<const double>(features, n_features));
  });
}

void cansave_gbdt_free(cansave_gbdt* model) { delete model; }

}  // extern "C"
