// mdtc: train, evaluate, predict, gradcheck, synth. Exit codes: 0 success,
// 1 runtime or check failure, 2 usage or config error.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mdtc/config.hpp"
#include "mdtc/errors.hpp"
#include "mdtc/gradcheck_suite.hpp"
#include "mdtc/metrics.hpp"
#include "mdtc/model_io.hpp"
#include "mdtc/synth.hpp"
#include "mdtc/train.hpp"

namespace {

using namespace mdtc;

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  std::string model_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

std::size_t argmax_row(const Tensor& probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

int cmd_train(const CommonArgs& a) {
  RunConfig cfg = load_run_config(a.config_path);
  cfg.data_path = a.data_path;
  if (!a.model_path.empty()) cfg.model_out = a.model_path;
  if (!a.out_path.empty()) cfg.metrics_out = a.out_path;
  if (a.seed_set) cfg.train.seed = a.seed;
  cfg.train.progress = true;

  Corpus corpus = load_corpus(cfg.data_path);

  MetricsReport report;
  if (cfg.train.cv_folds >= 2) {
    // Cross-validation supplies the report; the shipped model is still
    // trained on the full corpus.
    report = cross_validate(corpus, cfg.train, cfg.train.cv_folds);
    std::cout << render_table({{"cv", report}});
  }

  TrainResult result = train(corpus, cfg.train);
  if (cfg.train.cv_folds < 2) report = result.report;

  save_model(result.bundle, cfg.model_out);
  save_metrics(report, cfg.resolved_metrics_out());
  std::cout << "model: " << cfg.model_out << "\n"
            << "metrics: " << cfg.resolved_metrics_out() << "\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& a, const std::string& infer) {
  ModelBundle bundle = load_model(a.model_path);
  Corpus corpus = load_corpus(a.data_path);

  EvalOptions opts;
  opts.infer = infer_mode_from_name(infer, &opts.fixed_domain);
  if (opts.infer == InferMode::Fixed) {
    bool known = false;
    for (const auto& d : bundle.domains) known = known || d == opts.fixed_domain;
    if (!known) {
      std::string msg = "unknown domain \"" + opts.fixed_domain +
                        "\"; known domains:";
      for (const auto& d : bundle.domains) msg += " " + d;
      throw ConfigError(msg);
    }
  }

  MetricsReport report = evaluate(bundle, corpus, opts);
  std::cout << render_table({{infer, report}});
  std::ostringstream mac;
  mac << std::fixed << std::setprecision(1) << report.macro * 100.0;
  std::cout << "macro-average: " << mac.str() << "\n";

  std::string out = a.out_path.empty() ? a.model_path + ".eval.json"
                                       : a.out_path;
  save_metrics(report, out);
  std::cerr << "report: " << out << "\n";
  return 0;
}

int cmd_predict(const CommonArgs& a, const std::string& input_path) {
  ModelBundle bundle = load_model(a.model_path);

  std::ifstream file;
  if (!input_path.empty()) {
    file.open(input_path, std::ios::binary);
    if (!file) throw ConfigError("cannot open input file: " + input_path);
  }
  std::istream& in = input_path.empty() ? std::cin : file;

  const Model& m = bundle.model;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<int> ids = tokenize(line, bundle.tokenizer, bundle.vocab);
    nlohmann::json out;
    Prediction pred;
    if (m.kind == ModelKind::Cond) {
      MinEntropyChoice choice =
          min_entropy_predict(m, {ids}, Granularity::Instance);
      std::size_t route = choice.instance_domain.at(0);
      pred = predict_instance(m, ids, route, Mode::Eval);
      out["domain"] = bundle.domains.at(route);
      out["entropy"] = entropy(pred.class_probs);
    } else {
      pred = predict_instance(m, ids, std::nullopt, Mode::Eval);
    }
    out["label"] = bundle.labels.at(argmax_row(pred.class_probs));
    std::vector<double> probs(pred.class_probs.data(),
                              pred.class_probs.data() + pred.class_probs.size());
    out["probs"] = probs;
    std::cout << out.dump() << "\n";
  }
  return 0;
}

GradCheckSizes parse_sizes(const std::string& text) {
  GradCheckSizes s;
  if (text.empty()) return s;
  std::vector<std::size_t> vals;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      vals.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw ConfigError("--sizes expects integers, got \"" + part + "\"");
    }
  }
  if (vals.size() > 7)
    throw ConfigError("--sizes takes at most 7 values: "
                      "seq,embed,filters,labels,domains,vocab,batch");
  std::size_t* slots[] = {&s.seq_len, &s.embed_dim, &s.filters, &s.labels,
                          &s.domains, &s.vocab,     &s.batch};
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i] == 0) throw ConfigError("--sizes values must be positive");
    *slots[i] = vals[i];
  }
  return s;
}

int cmd_gradcheck(const CommonArgs& a, const std::string& sizes_text,
                  bool inject_fault) {
  GradCheckSizes sizes = parse_sizes(sizes_text);
  std::vector<ComponentResult> results =
      run_gradcheck_suite(a.seed, sizes, inject_fault);

  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  bool all_pass = true;
  for (const auto& r : results) {
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width) + 2) << r.name
       << std::scientific << std::setprecision(3) << r.max_rel_error << "  "
       << (r.pass ? "pass" : "FAIL");
    std::cout << os.str() << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_synth(const CommonArgs& a) {
  SynthSpec spec = load_synth_spec(a.config_path);
  SynthResult result = synth_corpus(spec, a.seed);
  std::string prefix = a.out_path.empty() ? "synth" : a.out_path;
  save_corpus(result.train, prefix + ".train.jsonl");
  save_corpus(result.heldout, prefix + ".heldout.jsonl");
  std::cout << "train: " << prefix << ".train.jsonl ("
            << result.train.examples.size() << " records)\n"
            << "heldout: " << prefix << ".heldout.jsonl ("
            << result.heldout.examples.size() << " records)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-domain text classification toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  CommonArgs args;
  std::string infer = "min-entropy";
  std::string input_path;
  std::string sizes_text;
  bool inject_fault = false;
  int status = 0;

  CLI::App* train = app.add_subcommand("train", "train a model from a config");
  train->add_option("--config", args.config_path, "run config (JSON)")
      ->required();
  train->add_option("--data", args.data_path, "training corpus (JSONL)")
      ->required();
  train->add_option("--model", args.model_path, "model output path");
  train->add_option("--out", args.out_path, "metrics output path");
  CLI::Option* train_seed =
      train->add_option("--seed", args.seed, "override the config seed");
  train->callback([&] {
    args.seed_set = train_seed->count() > 0;
    status = cmd_train(args);
  });

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score a model on a labelled corpus");
  evaluate->add_option("--model", args.model_path, "model file")->required();
  evaluate->add_option("--data", args.data_path, "labelled corpus (JSONL)")
      ->required();
  evaluate->add_option(
      "--infer", infer,
      "gold | min-entropy | min-entropy-instance | oracle | fixed:<domain>");
  evaluate->add_option("--out", args.out_path, "report output path");
  evaluate->callback([&] { status = cmd_evaluate(args, infer); });

  CLI::App* predict =
      app.add_subcommand("predict", "label text, one line per input line");
  predict->add_option("--model", args.model_path, "model file")->required();
  predict->add_option("--input", input_path,
                      "input text file (default: standard input)");
  predict->callback([&] { status = cmd_predict(args, input_path); });

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every backward pass");
  gradcheck->add_option("--seed", args.seed, "sampling seed");
  gradcheck->add_option("--sizes", sizes_text,
                        "comma list: seq,embed,filters,labels,domains,vocab,"
                        "batch (prefix allowed)");
  gradcheck->add_flag("--inject-fault", inject_fault,
                      "corrupt one gradient; the run must then fail");
  gradcheck->callback(
      [&] { status = cmd_gradcheck(args, sizes_text, inject_fault); });

  CLI::App* synth =
      app.add_subcommand("synth", "generate the synthetic benchmark corpora");
  synth->add_option("--config", args.config_path, "generator config (JSON)")
      ->required();
  synth->add_option("--out", args.out_path, "output prefix (default: synth)");
  synth->add_option("--seed", args.seed, "generator seed");
  synth->callback([&] { status = cmd_synth(args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const mdtc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mdtc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}
