#include "mdtc/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mdtc/errors.hpp"

namespace mdtc {

using nlohmann::json;

double macro_average(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("macro average of nothing");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

namespace {

json opt_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string metrics_to_json(const MetricsReport& r) {
  json j;
  j["per_domain_accuracy"] = r.per_domain_accuracy;
  json counts = json::object();
  for (const auto& [k, v] : r.counts) counts[k] = {v[0], v[1]};
  j["counts"] = counts;
  j["macro"] = r.macro;
  j["chosen_domain"] = r.chosen_domain;
  j["entropy_by_candidate"] = r.entropy_by_candidate;
  j["discriminator_accuracy"] = opt_to_json(r.discriminator_accuracy);
  j["flags"] = r.flags;
  json hist = json::array();
  for (const auto& e : r.history)
    hist.push_back({{"epoch", e.epoch},
                    {"train_task", e.train_task},
                    {"train_adv", e.train_adv},
                    {"train_gen", e.train_gen},
                    {"train_total", e.train_total},
                    {"dev_task", opt_to_json(e.dev_task)},
                    {"dev_accuracy", opt_to_json(e.dev_accuracy)}});
  j["history"] = hist;
  return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& text) {
  MetricsReport r;
  try {
    json j = json::parse(text);
    r.per_domain_accuracy =
        j.at("per_domain_accuracy").get<std::map<std::string, double>>();
    for (const auto& [k, v] : j.at("counts").items())
      r.counts[k] = {v.at(0).get<std::size_t>(), v.at(1).get<std::size_t>()};
    r.macro = j.at("macro").get<double>();
    r.chosen_domain =
        j.at("chosen_domain").get<std::map<std::string, std::string>>();
    r.entropy_by_candidate =
        j.at("entropy_by_candidate")
            .get<std::map<std::string, std::map<std::string, double>>>();
    r.discriminator_accuracy = opt_from_json(j.at("discriminator_accuracy"));
    r.flags = j.at("flags").get<std::vector<std::string>>();
    for (const auto& e : j.at("history")) {
      EpochStats s;
      s.epoch = e.at("epoch").get<std::size_t>();
      s.train_task = e.at("train_task").get<double>();
      s.train_adv = e.at("train_adv").get<double>();
      s.train_gen = e.at("train_gen").get<double>();
      s.train_total = e.at("train_total").get<double>();
      s.dev_task = opt_from_json(e.at("dev_task"));
      s.dev_accuracy = opt_from_json(e.at("dev_accuracy"));
      r.history.push_back(s);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad metrics report: ") + e.what());
  }
  return r;
}

void save_metrics(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write metrics file: " + path);
  out << metrics_to_json(r);
  if (!out) throw ParseError("write failed: " + path);
}

MetricsReport load_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open metrics file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return metrics_from_json(ss.str());
}

std::string render_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::set<std::string> domain_set;
  std::size_t label_w = 5;
  for (const auto& [label, rep] : rows) {
    label_w = std::max(label_w, label.size());
    for (const auto& [d, acc] : rep.per_domain_accuracy) domain_set.insert(d);
  }
  std::vector<std::string> domains(domain_set.begin(), domain_set.end());

  auto pct = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * v;
    return os.str();
  };

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(label_w + 2)) << "model";
  for (const auto& d : domains)
    os << std::right << std::setw(static_cast<int>(std::max<std::size_t>(d.size(), 6) + 2)) << d;
  os << std::right << std::setw(8) << "ALL" << '\n';
  for (const auto& [label, rep] : rows) {
    os << std::left << std::setw(static_cast<int>(label_w + 2)) << label;
    for (const auto& d : domains) {
      const int w = static_cast<int>(std::max<std::size_t>(d.size(), 6) + 2);
      auto it = rep.per_domain_accuracy.find(d);
      os << std::right << std::setw(w)
         << (it == rep.per_domain_accuracy.end() ? std::string("-")
                                                 : pct(it->second));
    }
    os << std::right << std::setw(8) << pct(rep.macro) << '\n';
  }
  return os.str();
}

}  // namespace mdtc
