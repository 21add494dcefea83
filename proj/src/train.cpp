#include "mdtc/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mdtc/errors.hpp"

namespace mdtc {

namespace {

std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[best]) best = i;
  return best;
}

// Mean task accuracy with gold-domain routing; dev data is training-domain.
double gold_accuracy(const Model& model, const IndexedCorpus& data,
                     const std::vector<std::size_t>& idxs) {
  if (idxs.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i : idxs) {
    const auto& item = data.items[i];
    std::optional<std::size_t> route;
    if (model.kind == ModelKind::Cond)
      route = static_cast<std::size_t>(item.domain);
    Prediction p = predict_instance(model, item.ids, route, Mode::Eval);
    if (static_cast<int>(argmax(p.class_probs)) == item.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idxs.size());
}

}  // namespace

TrainResult train(const Corpus& corpus, const TrainConfig& config) {
  if (corpus.labels.size() < 2)
    throw ConfigError("training corpus must cover at least two labels");
  if (corpus.domains.empty())
    throw ConfigError("training corpus has no domains");
  if (config.dev_fraction < 0.0 || config.dev_fraction >= 1.0)
    throw ConfigError("dev fraction must lie in [0, 1)");

  std::size_t max_width = 0;
  for (const auto& s : config.hyper.conv_specs)
    max_width = std::max(max_width, s.width);
  if (config.tokenizer.max_len < max_width)
    throw ConfigError("max_len " + std::to_string(config.tokenizer.max_len) +
                      " is shorter than the widest conv filter " +
                      std::to_string(max_width));

  Vocab vocab = build_vocab(corpus, config.tokenizer);
  Rng init_rng(derive_seed(config.seed, 0));
  Model model =
      make_model(config.kind, config.switches, config.hyper, vocab.size(),
                 corpus.labels.size(), corpus.domains.size(), init_rng);

  IndexedCorpus data = index_corpus(corpus, config.tokenizer, vocab,
                                    corpus.labels, corpus.domains);
  MetricsReport report;
  report.flags = data.warnings;
  if (data.items.empty()) throw TrainError("no usable training records");

  std::vector<std::size_t> order(data.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(config.seed, 1));
  shuffle(order, split_rng);
  const auto dev_n = static_cast<std::size_t>(
      config.dev_fraction * static_cast<double>(order.size()));
  std::vector<std::size_t> dev_idx(order.begin(),
                                   order.begin() + static_cast<std::ptrdiff_t>(dev_n));
  std::vector<std::size_t> train_idx(
      order.begin() + static_cast<std::ptrdiff_t>(dev_n), order.end());
  if (train_idx.empty()) throw TrainError("dev split left no training data");

  AdamConfig acfg;
  acfg.alpha = config.hyper.learning_rate;
  AdamState adam = make_adam_state(model.params, acfg);

  Rng loop_rng(derive_seed(config.seed, 2));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto batches =
        batch_indices(train_idx.size(), config.batch_size, loop_rng, true);
    double task_sum = 0.0, adv_sum = 0.0, gen_sum = 0.0, total_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      std::vector<std::size_t> idxs;
      idxs.reserve(batches[step].size());
      for (std::size_t pos : batches[step]) idxs.push_back(train_idx[pos]);
      Batch batch = make_batch(data, idxs);
      ParamSet grads = zeros_like(model.params);
      LossBreakdown loss = loss_backward(model, batch, loop_rng, grads);
      if (!loss.finite())
        throw TrainError("non-finite loss at epoch " +
                         std::to_string(epoch + 1) + ", step " +
                         std::to_string(step + 1));
      adam_step(model.params, grads, adam);
      const auto b = static_cast<double>(batch.size());
      task_sum += loss.task * b;
      adv_sum += loss.adv * b;
      gen_sum += loss.gen * b;
      total_sum += loss.total_reported * b;
      seen += batch.size();
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    const auto n = static_cast<double>(seen);
    stats.train_task = task_sum / n;
    stats.train_adv = adv_sum / n;
    stats.train_gen = gen_sum / n;
    stats.train_total = total_sum / n;
    if (!dev_idx.empty()) {
      Batch dev = make_batch(data, dev_idx);
      stats.dev_task = compute_loss(model, dev, Mode::Eval).task;
      stats.dev_accuracy = gold_accuracy(model, data, dev_idx);
    }
    if (config.progress) {
      std::ostringstream os;
      os << "epoch " << stats.epoch << "/" << config.epochs << "  task "
         << stats.train_task << "  adv " << stats.train_adv << "  gen "
         << stats.train_gen << "  total " << stats.train_total;
      if (stats.dev_task)
        os << "  dev_task " << *stats.dev_task << "  dev_acc "
           << *stats.dev_accuracy;
      std::cerr << os.str() << '\n';
    }
    report.history.push_back(stats);
  }

  TrainResult result{{std::move(model), config.tokenizer, std::move(vocab),
                      corpus.labels, corpus.domains},
                     std::move(adam),
                     std::move(report)};
  return result;
}

double entropy(const Tensor& probs) {
  double h = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

namespace {

// Class distributions for every sequence under one candidate pathway.
std::vector<Tensor> probs_under(const Model& model,
                                const std::vector<std::vector<int>>& seqs,
                                std::optional<std::size_t> route) {
  std::vector<Tensor> out;
  out.reserve(seqs.size());
  for (const auto& ids : seqs)
    out.push_back(predict_instance(model, ids, route, Mode::Eval).class_probs);
  return out;
}

}  // namespace

MinEntropyChoice min_entropy_predict(const Model& model,
                                     const std::vector<std::vector<int>>& seqs,
                                     Granularity granularity) {
  if (model.kind != ModelKind::Cond)
    throw ConfigError("pathway inference applies to cond models only");
  const std::size_t K = model.n_domains;
  std::vector<std::vector<Tensor>> all;  // [k][instance]
  all.reserve(K);
  for (std::size_t k = 0; k < K; ++k)
    all.push_back(probs_under(model, seqs, k));

  MinEntropyChoice choice;
  choice.mean_entropy.assign(K, 0.0);
  std::vector<std::vector<double>> ent(K, std::vector<double>(seqs.size()));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      ent[k][i] = entropy(all[k][i]);
      choice.mean_entropy[k] += ent[k][i];
    }
    if (!seqs.empty())
      choice.mean_entropy[k] /= static_cast<double>(seqs.size());
  }

  if (granularity == Granularity::Dataset) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (choice.mean_entropy[k] < choice.mean_entropy[best]) best = k;
    choice.domain = best;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      choice.predictions.push_back(static_cast<int>(argmax(all[best][i])));
      choice.instance_domain.push_back(best);
    }
  } else {
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < K; ++k)
        if (ent[k][i] < ent[best][i]) best = k;
      choice.predictions.push_back(static_cast<int>(argmax(all[best][i])));
      choice.instance_domain.push_back(best);
    }
    // Dataset-level field still reports the global argmin for diagnostics.
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (choice.mean_entropy[k] < choice.mean_entropy[best]) best = k;
    choice.domain = best;
  }
  return choice;
}

OracleChoice oracle_domain_predict(const Model& model,
                                   const std::vector<std::vector<int>>& seqs,
                                   const std::vector<int>& gold_labels) {
  if (model.kind != ModelKind::Cond)
    throw ConfigError("pathway inference applies to cond models only");
  if (seqs.size() != gold_labels.size())
    throw ConfigError("oracle selection needs one gold label per sequence");
  const std::size_t K = model.n_domains;
  OracleChoice choice;
  std::vector<std::vector<int>> preds(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto probs = probs_under(model, seqs, k);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      preds[k].push_back(static_cast<int>(argmax(probs[i])));
      if (preds[k][i] == gold_labels[i]) ++correct;
    }
    choice.accuracy_by_candidate.push_back(
        seqs.empty() ? 0.0
                     : static_cast<double>(correct) /
                           static_cast<double>(seqs.size()));
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (choice.accuracy_by_candidate[k] > choice.accuracy_by_candidate[best])
      best = k;
  choice.domain = best;
  choice.accuracy = choice.accuracy_by_candidate[best];
  choice.predictions = preds[best];
  return choice;
}

InferMode infer_mode_from_name(const std::string& name,
                               std::string* fixed_domain) {
  if (name == "gold") return InferMode::Gold;
  if (name == "min-entropy") return InferMode::MinEntropyDataset;
  if (name == "min-entropy-instance") return InferMode::MinEntropyInstance;
  if (name == "oracle") return InferMode::Oracle;
  if (name.rfind("fixed:", 0) == 0) {
    if (fixed_domain) *fixed_domain = name.substr(6);
    return InferMode::Fixed;
  }
  throw ConfigError(
      "unknown inference mode \"" + name +
      "\"; expected gold, min-entropy, min-entropy-instance, oracle, or "
      "fixed:<domain>");
}

MetricsReport evaluate(const ModelBundle& bundle, const Corpus& corpus,
                       const EvalOptions& opts) {
  const Model& model = bundle.model;
  IndexedCorpus data = index_corpus(corpus, bundle.tokenizer, bundle.vocab,
                                    bundle.labels, bundle.domains);
  MetricsReport report;
  report.flags = data.warnings;
  if (data.items.empty())
    throw ConfigError("evaluation corpus has no usable records");

  std::set<std::string> unseen;
  for (std::size_t i = 0; i < data.items.size(); ++i)
    if (data.items[i].label < 0)
      unseen.insert(corpus.examples[data.source[i]].label);
  for (const auto& l : unseen)
    report.flags.push_back("label \"" + l + "\" unseen in training; counted incorrect");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.items.size(); ++i)
    groups[corpus.examples[data.source[i]].domain].push_back(i);

  std::size_t fixed_route = 0;
  if (model.kind == ModelKind::Cond && opts.infer == InferMode::Fixed) {
    auto it = std::find(bundle.domains.begin(), bundle.domains.end(),
                        opts.fixed_domain);
    if (it == bundle.domains.end()) {
      std::string known;
      for (const auto& d : bundle.domains)
        known += (known.empty() ? "" : ", ") + d;
      throw ConfigError("unknown domain \"" + opts.fixed_domain +
                        "\"; known training domains: " + known);
    }
    fixed_route = static_cast<std::size_t>(it - bundle.domains.begin());
  }

  for (const auto& [domain, idxs] : groups) {
    std::vector<int> preds(idxs.size(), -1);
    if (model.kind != ModelKind::Cond) {
      for (std::size_t j = 0; j < idxs.size(); ++j) {
        Prediction p = predict_instance(model, data.items[idxs[j]].ids,
                                        std::nullopt, Mode::Eval);
        preds[j] = static_cast<int>(argmax(p.class_probs));
      }
    } else if (opts.infer == InferMode::Gold) {
      for (std::size_t j = 0; j < idxs.size(); ++j) {
        const auto& item = data.items[idxs[j]];
        if (item.domain < 0)
          throw RoutingError("domain \"" + domain +
                             "\" not seen in training; gold routing needs "
                             "in-domain data");
        Prediction p = predict_instance(
            model, item.ids, static_cast<std::size_t>(item.domain),
            Mode::Eval);
        preds[j] = static_cast<int>(argmax(p.class_probs));
      }
    } else if (opts.infer == InferMode::Fixed) {
      for (std::size_t j = 0; j < idxs.size(); ++j) {
        Prediction p = predict_instance(model, data.items[idxs[j]].ids,
                                        fixed_route, Mode::Eval);
        preds[j] = static_cast<int>(argmax(p.class_probs));
      }
      report.chosen_domain[domain] = bundle.domains[fixed_route];
    } else if (opts.infer == InferMode::Oracle) {
      std::vector<std::vector<int>> seqs;
      std::vector<int> gold;
      for (std::size_t j = 0; j < idxs.size(); ++j) {
        seqs.push_back(data.items[idxs[j]].ids);
        gold.push_back(data.items[idxs[j]].label);
      }
      OracleChoice oc = oracle_domain_predict(model, seqs, gold);
      preds = oc.predictions;
      report.chosen_domain[domain] = bundle.domains[oc.domain];
    } else {
      std::vector<std::vector<int>> seqs;
      for (std::size_t j = 0; j < idxs.size(); ++j)
        seqs.push_back(data.items[idxs[j]].ids);
      const Granularity g = opts.infer == InferMode::MinEntropyInstance
                                ? Granularity::Instance
                                : Granularity::Dataset;
      MinEntropyChoice mc = min_entropy_predict(model, seqs, g);
      preds = mc.predictions;
      if (g == Granularity::Dataset)
        report.chosen_domain[domain] = bundle.domains[mc.domain];
      for (std::size_t k = 0; k < mc.mean_entropy.size(); ++k)
        report.entropy_by_candidate[domain][bundle.domains[k]] =
            mc.mean_entropy[k];
    }

    std::size_t correct = 0;
    for (std::size_t j = 0; j < idxs.size(); ++j)
      if (preds[j] == data.items[idxs[j]].label) ++correct;
    report.counts[domain] = {correct, idxs.size()};
    report.per_domain_accuracy[domain] =
        static_cast<double>(correct) / static_cast<double>(idxs.size());
  }

  std::vector<double> accs;
  for (const auto& [d, a] : report.per_domain_accuracy) accs.push_back(a);
  report.macro = macro_average(accs);

  if (model.params.discriminator) {
    const bool all_training = std::all_of(
        data.items.begin(), data.items.end(),
        [](const IndexedExample& it) { return it.domain >= 0; });
    if (all_training) {
      std::size_t correct = 0;
      for (const auto& item : data.items) {
        std::optional<std::size_t> route;
        if (model.kind == ModelKind::Cond)
          route = static_cast<std::size_t>(item.domain);
        Prediction p = predict_instance(model, item.ids, route, Mode::Eval);
        if (static_cast<int>(argmax(p.disc_probs)) == item.domain) ++correct;
      }
      report.discriminator_accuracy =
          static_cast<double>(correct) / static_cast<double>(data.items.size());
    }
  }
  return report;
}

MetricsReport cross_validate(const Corpus& corpus, const TrainConfig& config,
                             std::size_t k) {
  std::vector<std::string> warnings;
  auto folds = kfold_split(corpus, k, config.seed, &warnings);
  std::map<std::string, std::array<std::size_t, 2>> pooled;
  MetricsReport report;
  report.flags = warnings;

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<Example> tr, te;
    for (std::size_t i : folds[f].train) tr.push_back(corpus.examples[i]);
    for (std::size_t i : folds[f].test) te.push_back(corpus.examples[i]);
    if (te.empty()) continue;
    TrainConfig fold_cfg = config;
    fold_cfg.seed = derive_seed(config.seed, 100 + f);
    fold_cfg.cv_folds = 0;
    fold_cfg.progress = false;
    TrainResult res = train(make_corpus(std::move(tr)), fold_cfg);
    EvalOptions opts;
    opts.infer = InferMode::Gold;
    MetricsReport fold_rep =
        evaluate(res.bundle, make_corpus(std::move(te)), opts);
    for (const auto& [d, c] : fold_rep.counts) {
      pooled[d][0] += c[0];
      pooled[d][1] += c[1];
    }
    for (const auto& fl : fold_rep.flags)
      report.flags.push_back("fold " + std::to_string(f + 1) + ": " + fl);
  }

  std::vector<double> accs;
  for (const auto& [d, c] : pooled) {
    report.counts[d] = c;
    const double acc =
        static_cast<double>(c[0]) / static_cast<double>(c[1]);
    report.per_domain_accuracy[d] = acc;
    accs.push_back(acc);
  }
  if (accs.empty()) throw TrainError("cross-validation scored no examples");
  report.macro = macro_average(accs);
  return report;
}

double domain_probe_accuracy(const ModelBundle& bundle, const Corpus& corpus,
                             std::uint64_t seed) {
  const Model& model = bundle.model;
  IndexedCorpus data = index_corpus(corpus, bundle.tokenizer, bundle.vocab,
                                    bundle.labels, bundle.domains);
  if (data.items.empty()) throw ConfigError("probe corpus has no usable records");

  std::vector<Tensor> feats;
  std::vector<int> doms;
  for (const auto& item : data.items) {
    if (item.domain < 0)
      throw RoutingError("probe needs training-domain data");
    std::optional<std::size_t> route;
    if (model.kind == ModelKind::Cond)
      route = static_cast<std::size_t>(item.domain);
    feats.push_back(predict_instance(model, item.ids, route, Mode::Eval).h_s);
    doms.push_back(item.domain);
  }

  const std::size_t dim = feats[0].size();
  const std::size_t K = model.n_domains;
  Rng init_rng(derive_seed(seed, 7));
  Linear probe = make_linear(dim, K, init_rng);
  AdamConfig acfg;
  acfg.alpha = 0.01;
  Tensor mw = Tensor::zeros(probe.w.shape()), vw = Tensor::zeros(probe.w.shape());
  Tensor mb = Tensor::zeros(probe.b.shape()), vb = Tensor::zeros(probe.b.shape());
  std::uint64_t t = 0;

  Rng loop_rng(derive_seed(seed, 8));
  const std::size_t kEpochs = 25, kBatch = 64;
  for (std::size_t epoch = 0; epoch < kEpochs; ++epoch) {
    auto batches = batch_indices(feats.size(), kBatch, loop_rng, true);
    for (const auto& batch : batches) {
      Tensor dw = Tensor::zeros(probe.w.shape());
      Tensor db = Tensor::zeros(probe.b.shape());
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i : batch) {
        Tensor p = softmax(linear_forward(feats[i], probe));
        for (std::size_t j = 0; j < p.size(); ++j) p[j] *= inv_b;
        p[static_cast<std::size_t>(doms[i])] -= inv_b;
        linear_backward(feats[i], probe, p, dw, db, nullptr);
      }
      ++t;
      adam_update_tensor(probe.w, dw, mw, vw, acfg, t);
      adam_update_tensor(probe.b, db, mb, vb, acfg, t);
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < feats.size(); ++i)
    if (static_cast<int>(argmax(linear_forward(feats[i], probe))) == doms[i])
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(feats.size());
}

}  // namespace mdtc
