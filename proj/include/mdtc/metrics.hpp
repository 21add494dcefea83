#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdtc {

// Unweighted arithmetic mean; works on fractions and percentages alike.
double macro_average(const std::vector<double>& values);

struct EpochStats {
  std::size_t epoch = 0;
  double train_task = 0.0;
  double train_adv = 0.0;
  double train_gen = 0.0;
  double train_total = 0.0;
  std::optional<double> dev_task;
  std::optional<double> dev_accuracy;
};

struct MetricsReport {
  // Keyed by the evaluated corpus's domain strings.
  std::map<std::string, double> per_domain_accuracy;
  std::map<std::string, std::array<std::size_t, 2>> counts;  // correct, total
  double macro = 0.0;

  // Cond inference diagnostics: per evaluation group, the training domain
  // the inference picked and the mean prediction entropy under every
  // candidate pathway.
  std::map<std::string, std::string> chosen_domain;
  std::map<std::string, std::map<std::string, double>> entropy_by_candidate;

  // Domain-classification accuracy of the discriminator head on the shared
  // representation; only computed when gold training-domain ids exist.
  std::optional<double> discriminator_accuracy;

  std::vector<std::string> flags;
  std::vector<EpochStats> history;
};

std::string metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const std::string& text);
void save_metrics(const MetricsReport& r, const std::string& path);
MetricsReport load_metrics(const std::string& path);

// Aligned table, domains as columns plus a trailing macro column, one row
// per label given; values rendered as percentages with one decimal.
std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace mdtc
