#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "lsm/matrix.hpp"

namespace lsm {

/// Binary class-indicator signals over one batch, one per class present.
struct LabelSignalSet {
  std::size_t batch_size = 0;
  std::vector<int> classes_present;  // ascending
  std::map<int, std::vector<double>> signals;

  const std::vector<double>& signal(int class_id) const { return signals.at(class_id); }

  /// Sum over classes of s_c s_c^T, i.e. the same-label indicator matrix.
  Matrix same_class_matrix() const;
};

LabelSignalSet make_label_signals(std::span<const int> labels, int num_classes);

/// Sum over present classes of s_c^T P s_c.
double layer_smoothness_sum(const Matrix& graph_power, const LabelSignalSet& signals);

/// |sum_post - sum_pre|
double smoothness_gap(double sum_pre, double sum_post);

/// Mean of |gap| over consecutive monitored points. Requires at least one gap.
double delta_total(std::span<const double> gaps);

/// Per-layer label-signal smoothness for one batch (or an average of batches).
struct SmoothnessProfile {
  struct Layer {
    std::size_t layer_index = 0;
    std::map<int, double> per_class;
    double total = 0.0;
  };

  int power_m = 1;
  std::vector<Layer> per_layer;

  /// Consecutive-layer gaps |total[l+1] - total[l]|.
  std::vector<double> gaps() const;
};

struct ProfileRow {
  int epoch = 0;
  std::size_t layer_index = 0;
  int power_m = 1;
  int class_id = 0;
  double smoothness = 0.0;
};

std::vector<ProfileRow> profile_rows(const SmoothnessProfile& profile, int epoch);

/// CSV with header epoch,layer_index,power_m,class_id,smoothness.
void write_profile_csv(std::ostream& out, std::span<const ProfileRow> rows);

}  // namespace lsm
