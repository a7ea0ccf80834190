#include "lsm/label_signals.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "lsm/errors.hpp"
#include "lsm/graph.hpp"

namespace lsm {

Matrix LabelSignalSet::same_class_matrix() const {
  Matrix q(batch_size, batch_size);
  for (const auto& [c, s] : signals)
    for (std::size_t i = 0; i < batch_size; ++i) {
      if (s[i] == 0.0) continue;
      for (std::size_t j = 0; j < batch_size; ++j) q(i, j) += s[i] * s[j];
    }
  return q;
}

LabelSignalSet make_label_signals(std::span<const int> labels, int num_classes) {
  LabelSignalSet set;
  set.batch_size = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes)
      throw InputError("make_label_signals: class id " + std::to_string(c) + " at position " +
                       std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    auto [it, inserted] = set.signals.try_emplace(c, labels.size(), 0.0);
    it->second[i] = 1.0;
  }
  for (const auto& entry : set.signals) set.classes_present.push_back(entry.first);
  return set;
}

double layer_smoothness_sum(const Matrix& graph_power, const LabelSignalSet& signals) {
  double total = 0.0;
  for (int c : signals.classes_present) total += graph::smoothness(graph_power, signals.signal(c));
  return total;
}

double smoothness_gap(double sum_pre, double sum_post) { return std::abs(sum_post - sum_pre); }

double delta_total(std::span<const double> gaps) {
  if (gaps.empty())
    throw ConfigError("delta_total: need at least two monitored layers (one gap)");
  double total = 0.0;
  for (double g : gaps) total += std::abs(g);
  return total / static_cast<double>(gaps.size());
}

std::vector<double> SmoothnessProfile::gaps() const {
  std::vector<double> out;
  for (std::size_t l = 1; l < per_layer.size(); ++l)
    out.push_back(smoothness_gap(per_layer[l - 1].total, per_layer[l].total));
  return out;
}

std::vector<ProfileRow> profile_rows(const SmoothnessProfile& profile, int epoch) {
  std::vector<ProfileRow> rows;
  for (const auto& layer : profile.per_layer)
    for (const auto& [c, value] : layer.per_class)
      rows.push_back({epoch, layer.layer_index, profile.power_m, c, value});
  return rows;
}

void write_profile_csv(std::ostream& out, std::span<const ProfileRow> rows) {
  const auto old_precision = out.precision(17);
  out << "epoch,layer_index,power_m,class_id,smoothness\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << r.layer_index << ',' << r.power_m << ',' << r.class_id << ','
        << r.smoothness << '\n';
  out.precision(old_precision);
}

}  // namespace lsm
