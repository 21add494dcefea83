#include "mdtc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mdtc/errors.hpp"

namespace mdtc {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& what) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j = parse_json(json_text, "run config");
  reject_unknown(j,
                 {"arch", "adversary", "generator", "hyper", "tokenizer",
                  "train", "data", "model_out", "metrics_out"},
                 "run config");
  RunConfig cfg;
  try {
    if (j.contains("arch"))
      cfg.train.kind = kind_from_name(j.at("arch").get<std::string>());
    maybe(j, "adversary", cfg.train.switches.adversary);
    maybe(j, "generator", cfg.train.switches.generator);

    if (j.contains("hyper")) {
      const json& h = j.at("hyper");
      reject_unknown(h,
                     {"lambda_d", "lambda_g", "dropout", "embed_dim",
                      "learning_rate", "conv_specs"},
                     "hyper");
      maybe(h, "lambda_d", cfg.train.hyper.lambda_d);
      maybe(h, "lambda_g", cfg.train.hyper.lambda_g);
      maybe(h, "dropout", cfg.train.hyper.dropout);
      maybe(h, "embed_dim", cfg.train.hyper.embed_dim);
      maybe(h, "learning_rate", cfg.train.hyper.learning_rate);
      if (h.contains("conv_specs")) {
        cfg.train.hyper.conv_specs.clear();
        for (const auto& e : h.at("conv_specs")) {
          if (!e.is_array() || e.size() != 2)
            throw ConfigError("conv_specs entries must be [width, filters]");
          cfg.train.hyper.conv_specs.push_back(
              {e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
        }
      }
    }

    if (j.contains("tokenizer")) {
      const json& t = j.at("tokenizer");
      reject_unknown(t, {"mode", "max_len", "lowercase", "min_freq"},
                     "tokenizer");
      if (t.contains("mode")) {
        const std::string mode = t.at("mode").get<std::string>();
        if (mode == "byte")
          cfg.train.tokenizer = byte_tokenizer();
        else if (mode == "word")
          cfg.train.tokenizer = word_tokenizer();
        else
          throw ConfigError("tokenizer mode must be byte or word, got \"" +
                            mode + "\"");
      }
      maybe(t, "max_len", cfg.train.tokenizer.max_len);
      maybe(t, "lowercase", cfg.train.tokenizer.lowercase);
      maybe(t, "min_freq", cfg.train.tokenizer.min_freq);
    }

    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(
          t, {"epochs", "batch_size", "dev_fraction", "seed", "cv_folds"},
          "train");
      maybe(t, "epochs", cfg.train.epochs);
      maybe(t, "batch_size", cfg.train.batch_size);
      maybe(t, "dev_fraction", cfg.train.dev_fraction);
      maybe(t, "seed", cfg.train.seed);
      maybe(t, "cv_folds", cfg.train.cv_folds);
      if (cfg.train.cv_folds == 1)
        throw ConfigError("cv_folds must be 0 (off) or >= 2");
    }

    maybe(j, "data", cfg.data_path);
    maybe(j, "model_out", cfg.model_out);
    maybe(j, "metrics_out", cfg.metrics_out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

SynthSpec parse_synth_spec(const std::string& json_text) {
  json j = parse_json(json_text, "synth config");
  reject_unknown(j,
                 {"labels", "train_domains", "heldout_domains",
                  "docs_per_domain_label", "doc_length", "markers_per_label",
                  "markers_per_domain", "noise_vocab", "label_rate",
                  "domain_rate", "spur_rate"},
                 "synth config");
  SynthSpec s;
  try {
    maybe(j, "labels", s.n_labels);
    maybe(j, "train_domains", s.n_train_domains);
    maybe(j, "heldout_domains", s.n_heldout_domains);
    maybe(j, "docs_per_domain_label", s.docs_per_domain_label);
    maybe(j, "doc_length", s.doc_length);
    maybe(j, "markers_per_label", s.markers_per_label);
    maybe(j, "markers_per_domain", s.markers_per_domain);
    maybe(j, "noise_vocab", s.noise_vocab);
    maybe(j, "label_rate", s.label_rate);
    maybe(j, "domain_rate", s.domain_rate);
    maybe(j, "spur_rate", s.spur_rate);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  return s;
}

SynthSpec load_synth_spec(const std::string& path) {
  return parse_synth_spec(read_file(path));
}

}  // namespace mdtc
