#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace screenleak {

struct LabeledItem {
  std::vector<double> features;
  int label = 0;
  std::string screen_id;
};

struct LabeledDataset {
  std::vector<LabeledItem> items;
  std::vector<std::string> label_names;
  std::size_t feature_len = 0;

  /// Throws ParamError on ragged features or out-of-range labels.
  void validate() const;
  std::size_t size() const { return items.size(); }
  void add(std::vector<double> features, int label, std::string screen_id = {});
};

struct TrainOptions {
  int epochs = 300;
  double learn_rate = 1.0;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

struct SoftmaxModel {
  /// classes x (feature_len + 1), row-major; the last column is the bias.
  std::vector<double> weights;
  std::size_t classes = 0;
  std::size_t feature_len = 0;
  /// Per-dimension z-score statistics taken from the training data.
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<std::string> label_names;

  int epochs = 0;
  double learn_rate = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_history;
};

struct CentroidModel {
  std::vector<std::vector<double>> centroids;
  std::vector<std::string> label_names;
  double temperature = 10.0;
};

using Model = std::variant<SoftmaxModel, CentroidModel>;

SoftmaxModel train_softmax(const LabeledDataset& data, const TrainOptions& options = {});

/// Class centroid = mean of the class traces after rotating each onto the class's first trace.
CentroidModel train_centroid(const LabeledDataset& data);

std::vector<double> predict_proba(const Model& model, std::span<const double> features);
int predict(const Model& model, std::span<const double> features);

struct Confident {
  int label = 0;
  double confidence = 0.0;
};

/// Argmax label when its probability reaches threshold, otherwise nullopt.
std::optional<Confident> predict_confident(const Model& model, std::span<const double> features, double threshold);

struct ThresholdStats {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  std::size_t confident = 0;
  std::size_t confident_errors = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::optional<ThresholdStats> thresholded;
};

EvalReport evaluate(const Model& model, const LabeledDataset& data, std::optional<double> threshold = std::nullopt);

struct MixSpec {
  std::map<std::string, std::size_t> per_screen_quota;
  std::set<std::string> exclude;
};

/// Draws, per class, `quota` items without replacement from every listed, non-excluded screen.
LabeledDataset assemble_collection(const std::map<std::string, LabeledDataset>& datasets, const MixSpec& spec,
                                   std::uint64_t seed);

/// Stratified split: about test_fraction of every class goes to the second set.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data, double test_fraction,
                                                        std::uint64_t seed);

const std::vector<std::string>& label_names(const Model& model);
std::size_t feature_len(const Model& model);

/// Versioned text format; doubles are written with 17 significant digits so predictions
/// round-trip exactly.
std::string serialize_model(const Model& model);
Model parse_model(const std::string& text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

void write_eval_report(const EvalReport& report, const std::vector<std::string>& labels,
                       const std::filesystem::path& path);

}  // namespace screenleak
