#include "screenleak/classify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"

namespace screenleak {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> softmax(std::vector<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

// Row-wise softmax cross-entropy, P overwritten with probabilities.
double cross_entropy(const Matrix& logits, const std::vector<int>& y, Matrix& P) {
  P = logits;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    auto row = P.row(i);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp();
    const double s = row.sum();
    row /= s;
    loss -= std::log(std::max(row(y[static_cast<std::size_t>(i)]), 1e-300));
  }
  return loss / static_cast<double>(P.rows());
}

double l2_penalty(const Matrix& W, double l2) {
  return 0.5 * l2 * W.leftCols(W.cols() - 1).squaredNorm();
}

std::vector<std::size_t> class_counts(const LabeledDataset& data) {
  std::vector<std::size_t> counts(data.label_names.size(), 0);
  for (const auto& it : data.items) ++counts[static_cast<std::size_t>(it.label)];
  return counts;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_len(std::size_t got, std::size_t want) {
  if (got != want) {
    throw ParamError("feature length " + std::to_string(got) + " does not match model length " + std::to_string(want));
  }
}

}  // namespace

void LabeledDataset::validate() const {
  for (const auto& it : items) {
    if (it.features.size() != feature_len) throw ParamError("ragged feature vectors in dataset");
    if (it.label < 0 || static_cast<std::size_t>(it.label) >= label_names.size()) {
      throw ParamError("label id out of range");
    }
    for (double v : it.features) {
      if (!std::isfinite(v)) throw ParamError("non-finite feature value");
    }
  }
}

void LabeledDataset::add(std::vector<double> features, int label, std::string screen_id) {
  if (items.empty() && feature_len == 0) feature_len = features.size();
  items.push_back({std::move(features), label, std::move(screen_id)});
}

SoftmaxModel train_softmax(const LabeledDataset& data, const TrainOptions& options) {
  data.validate();
  const std::size_t C = data.label_names.size();
  if (C < 2) throw ParamError("softmax training needs at least two classes");
  for (std::size_t c : class_counts(data)) {
    if (c < 2) throw ParamError("softmax training needs at least two samples per class");
  }
  if (options.epochs < 1 || !(options.learn_rate > 0.0)) throw ParamError("bad training options");

  const std::size_t N = data.size();
  const std::size_t F = data.feature_len;
  SoftmaxModel model;
  model.classes = C;
  model.feature_len = F;
  model.label_names = data.label_names;
  model.feature_mean.assign(F, 0.0);
  model.feature_scale.assign(F, 1.0);
  for (const auto& it : data.items) {
    for (std::size_t f = 0; f < F; ++f) model.feature_mean[f] += it.features[f];
  }
  for (double& m : model.feature_mean) m /= static_cast<double>(N);
  std::vector<double> var(F, 0.0);
  for (const auto& it : data.items) {
    for (std::size_t f = 0; f < F; ++f) {
      const double dlt = it.features[f] - model.feature_mean[f];
      var[f] += dlt * dlt;
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    const double sd = std::sqrt(var[f] / static_cast<double>(N));
    model.feature_scale[f] = sd > 1e-12 ? sd : 1.0;
  }

  Matrix X(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(F + 1));
  std::vector<int> y(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto& it = data.items[i];
    for (std::size_t f = 0; f < F; ++f) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
          (it.features[f] - model.feature_mean[f]) / model.feature_scale[f];
    }
    X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(F)) = 1.0;
    y[i] = it.label;
  }
  Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(C));
  for (std::size_t i = 0; i < N; ++i) Y(static_cast<Eigen::Index>(i), y[i]) = 1.0;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  Matrix W(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(F + 1));
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = init(rng);
  }

  Matrix P;
  double loss = cross_entropy(X * W.transpose(), y, P) + l2_penalty(W, options.l2);
  double lr = options.learn_rate;
  model.loss_history.push_back(loss);
  Matrix P_try;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Matrix grad = (P - Y).transpose() * X / static_cast<double>(N);
    grad.leftCols(grad.cols() - 1) += options.l2 * W.leftCols(W.cols() - 1);
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      Matrix W_try = W - lr * grad;
      const double loss_try = cross_entropy(X * W_try.transpose(), y, P_try) + l2_penalty(W_try, options.l2);
      if (loss_try <= loss) {
        W = std::move(W_try);
        std::swap(P, P_try);
        loss = loss_try;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    model.loss_history.push_back(loss);
    if (!accepted) break;  // no descent direction left at machine precision
  }

  model.weights.assign(W.data(), W.data() + W.size());
  model.epochs = options.epochs;
  model.learn_rate = lr;
  model.final_loss = loss;
  return model;
}

CentroidModel train_centroid(const LabeledDataset& data) {
  data.validate();
  const std::size_t C = data.label_names.size();
  const auto counts = class_counts(data);
  for (std::size_t c : counts) {
    if (c == 0) throw ParamError("every class needs at least one sample");
  }
  CentroidModel model;
  model.label_names = data.label_names;
  model.centroids.assign(C, std::vector<double>(data.feature_len, 0.0));
  std::vector<const std::vector<double>*> first(C, nullptr);
  for (const auto& it : data.items) {
    const auto c = static_cast<std::size_t>(it.label);
    auto& acc = model.centroids[c];
    if (first[c] == nullptr) {
      first[c] = &it.features;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += it.features[i];
      continue;
    }
    const auto m = max_corr_shift(it.features, *first[c]);
    const auto aligned = rotate(it.features, static_cast<std::ptrdiff_t>(m.shift));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += aligned[i];
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (double& v : model.centroids[c]) v /= static_cast<double>(counts[c]);
  }
  return model;
}

std::vector<double> predict_proba(const Model& model, std::span<const double> x) {
  if (const auto* sm = std::get_if<SoftmaxModel>(&model)) {
    check_len(x.size(), sm->feature_len);
    const std::size_t F = sm->feature_len;
    std::vector<double> z(F);
    for (std::size_t f = 0; f < F; ++f) z[f] = (x[f] - sm->feature_mean[f]) / sm->feature_scale[f];
    std::vector<double> logits(sm->classes, 0.0);
    for (std::size_t c = 0; c < sm->classes; ++c) {
      const double* w = sm->weights.data() + c * (F + 1);
      double acc = w[F];
      for (std::size_t f = 0; f < F; ++f) acc += w[f] * z[f];
      logits[c] = acc;
    }
    return softmax(std::move(logits));
  }
  const auto& cm = std::get<CentroidModel>(model);
  if (cm.centroids.empty()) throw ParamError("empty centroid model");
  check_len(x.size(), cm.centroids.front().size());
  std::vector<double> logits(cm.centroids.size());
  for (std::size_t c = 0; c < cm.centroids.size(); ++c) {
    logits[c] = cm.temperature * max_corr_shift(x, cm.centroids[c]).corr;
  }
  return softmax(std::move(logits));
}

int predict(const Model& model, std::span<const double> features) {
  const auto p = predict_proba(model, features);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::optional<Confident> predict_confident(const Model& model, std::span<const double> features, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ParamError("threshold must lie in [0, 1]");
  const auto p = predict_proba(model, features);
  const auto best = std::max_element(p.begin(), p.end());
  if (*best < threshold) return std::nullopt;
  return Confident{static_cast<int>(best - p.begin()), *best};
}

EvalReport evaluate(const Model& model, const LabeledDataset& data, std::optional<double> threshold) {
  if (data.items.empty()) throw ParamError("cannot evaluate on an empty dataset");
  const std::size_t C = label_names(model).size();
  EvalReport r;
  r.confusion.assign(C, std::vector<std::size_t>(C, 0));
  ThresholdStats ts;
  if (threshold) ts.threshold = *threshold;
  std::size_t correct = 0;
  std::size_t confident_correct = 0;
  for (const auto& it : data.items) {
    if (it.label < 0 || static_cast<std::size_t>(it.label) >= C) throw ParamError("label outside the model's classes");
    const auto p = predict_proba(model, it.features);
    const auto best = std::max_element(p.begin(), p.end());
    const auto pred = static_cast<std::size_t>(best - p.begin());
    ++r.confusion[static_cast<std::size_t>(it.label)][pred];
    const bool ok = pred == static_cast<std::size_t>(it.label);
    if (ok) ++correct;
    if (threshold && *best >= *threshold) {
      ++ts.confident;
      if (ok) {
        ++confident_correct;
      } else {
        ++ts.confident_errors;
      }
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.per_class_accuracy.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto total = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0});
    r.per_class_accuracy[c] = total ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(total) : 0.0;
  }
  if (threshold) {
    ts.precision = ts.confident ? static_cast<double>(confident_correct) / static_cast<double>(ts.confident) : 1.0;
    ts.recall = static_cast<double>(confident_correct) / static_cast<double>(data.size());
    r.thresholded = ts;
  }
  return r;
}

LabeledDataset assemble_collection(const std::map<std::string, LabeledDataset>& datasets, const MixSpec& spec,
                                   std::uint64_t seed) {
  LabeledDataset out;
  bool first = true;
  std::mt19937_64 rng(seed);
  for (const auto& [screen, quota] : spec.per_screen_quota) {
    if (spec.exclude.contains(screen)) continue;
    if (quota < 1) throw ParamError("per-screen quota must be at least 1");
    const auto it = datasets.find(screen);
    if (it == datasets.end()) throw ParamError("no dataset for screen '" + screen + "'");
    const auto& ds = it->second;
    if (first) {
      out.label_names = ds.label_names;
      out.feature_len = ds.feature_len;
      first = false;
    } else if (ds.label_names != out.label_names || ds.feature_len != out.feature_len) {
      throw ParamError("datasets disagree on labels or feature length");
    }
    std::vector<std::vector<std::size_t>> by_class(ds.label_names.size());
    for (std::size_t i = 0; i < ds.items.size(); ++i) by_class[static_cast<std::size_t>(ds.items[i].label)].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto& idx = by_class[c];
      if (idx.size() < quota) {
        throw ParamError("screen '" + screen + "' has " + std::to_string(idx.size()) + " samples of class '" +
                         ds.label_names[c] + "', quota is " + std::to_string(quota));
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t k = 0; k < quota; ++k) {
        auto item = ds.items[idx[k]];
        if (item.screen_id.empty()) item.screen_id = screen;
        out.items.push_back(std::move(item));
      }
    }
  }
  if (first) throw ParamError("collection is empty after exclusions");
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data, double test_fraction,
                                                        std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw ParamError("test_fraction must lie in [0, 1]");
  data.validate();
  std::pair<LabeledDataset, LabeledDataset> out;
  for (auto* part : {&out.first, &out.second}) {
    part->label_names = data.label_names;
    part->feature_len = data.feature_len;
  }
  std::vector<std::vector<std::size_t>> by_class(data.label_names.size());
  for (std::size_t i = 0; i < data.items.size(); ++i) by_class[static_cast<std::size_t>(data.items[i].label)].push_back(i);
  std::mt19937_64 rng(seed);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_test ? out.second : out.first).items.push_back(data.items[idx[k]]);
    }
  }
  return out;
}

const std::vector<std::string>& label_names(const Model& model) {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.label_names; }, model);
}

std::size_t feature_len(const Model& model) {
  if (const auto* sm = std::get_if<SoftmaxModel>(&model)) return sm->feature_len;
  const auto& cm = std::get<CentroidModel>(model);
  return cm.centroids.empty() ? 0 : cm.centroids.front().size();
}

std::string serialize_model(const Model& model) {
  std::ostringstream os;
  os << "screenleak-model 1\n";
  auto row = [&](std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << fmt(v[i]);
    os << '\n';
  };
  auto labels = [&](const std::vector<std::string>& names) {
    os << "labels " << names.size() << '\n';
    for (const auto& n : names) os << n << '\n';
  };
  if (const auto* sm = std::get_if<SoftmaxModel>(&model)) {
    os << "kind softmax\n";
    labels(sm->label_names);
    os << "meta epochs=" << sm->epochs << " learn_rate=" << fmt(sm->learn_rate) << " final_loss=" << fmt(sm->final_loss)
       << '\n';
    os << "dims " << sm->classes << ' ' << sm->feature_len << '\n';
    row(sm->feature_mean);
    row(sm->feature_scale);
    const std::size_t stride = sm->feature_len + 1;
    for (std::size_t c = 0; c < sm->classes; ++c) row(std::span(sm->weights).subspan(c * stride, stride));
  } else {
    const auto& cm = std::get<CentroidModel>(model);
    os << "kind centroid\n";
    labels(cm.label_names);
    os << "meta temperature=" << fmt(cm.temperature) << '\n';
    os << "dims " << cm.centroids.size() << ' ' << (cm.centroids.empty() ? 0 : cm.centroids.front().size()) << '\n';
    for (const auto& c : cm.centroids) row(c);
  }
  return os.str();
}

Model parse_model(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto next = [&]() -> std::string {
    if (!std::getline(is, line)) throw FormatError("truncated model file");
    return line;
  };
  auto expect_prefix = [&](const std::string& prefix) {
    const std::string l = next();
    if (l.rfind(prefix, 0) != 0) throw FormatError("expected '" + prefix + "' in model file, got '" + l + "'");
    return l.substr(prefix.size());
  };
  auto read_row = [&](std::size_t n) {
    std::istringstream rs(next());
    std::vector<double> v(n);
    for (double& x : v) {
      std::string tok;
      if (!(rs >> tok)) throw FormatError("short row in model file");
      try {
        x = std::stod(tok);
      } catch (const std::logic_error&) {
        throw FormatError("bad number '" + tok + "' in model file");
      }
    }
    return v;
  };
  auto meta_value = [](const std::string& meta, const std::string& key) {
    const auto p = meta.find(key + "=");
    if (p == std::string::npos) throw FormatError("missing meta key " + key);
    return std::stod(meta.substr(p + key.size() + 1));
  };

  if (next() != "screenleak-model 1") throw FormatError("not a screenleak model (bad magic line)");
  const std::string kind = expect_prefix("kind ");
  std::size_t nlabels = 0;
  try {
    nlabels = std::stoul(expect_prefix("labels "));
  } catch (const std::logic_error&) {
    throw FormatError("bad label count");
  }
  std::vector<std::string> names(nlabels);
  for (auto& n : names) n = next();
  const std::string meta = expect_prefix("meta ");
  std::istringstream ds(expect_prefix("dims "));
  std::size_t rows = 0, cols = 0;
  if (!(ds >> rows >> cols)) throw FormatError("bad dims line");

  if (kind == "softmax") {
    SoftmaxModel m;
    m.label_names = std::move(names);
    m.classes = rows;
    m.feature_len = cols;
    m.epochs = static_cast<int>(meta_value(meta, "epochs"));
    m.learn_rate = meta_value(meta, "learn_rate");
    m.final_loss = meta_value(meta, "final_loss");
    m.feature_mean = read_row(cols);
    m.feature_scale = read_row(cols);
    for (std::size_t c = 0; c < rows; ++c) {
      const auto r = read_row(cols + 1);
      m.weights.insert(m.weights.end(), r.begin(), r.end());
    }
    if (m.label_names.size() != rows) throw FormatError("label count does not match class count");
    return m;
  }
  if (kind == "centroid") {
    CentroidModel m;
    m.label_names = std::move(names);
    m.temperature = meta_value(meta, "temperature");
    for (std::size_t c = 0; c < rows; ++c) m.centroids.push_back(read_row(cols));
    if (m.label_names.size() != rows) throw FormatError("label count does not match class count");
    return m;
  }
  throw FormatError("unknown model kind '" + kind + "'");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << serialize_model(model);
  if (!os) throw IoError("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_model(ss.str());
}

void write_eval_report(const EvalReport& report, const std::vector<std::string>& labels,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "accuracy," << fmt(report.accuracy) << '\n';
  if (report.thresholded) {
    const auto& t = *report.thresholded;
    os << "threshold," << fmt(t.threshold) << '\n'
       << "precision," << fmt(t.precision) << '\n'
       << "recall," << fmt(t.recall) << '\n'
       << "confident," << t.confident << '\n'
       << "confident_errors," << t.confident_errors << '\n';
  }
  os << "true\\predicted";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  for (std::size_t r = 0; r < report.confusion.size(); ++r) {
    os << (r < labels.size() ? labels[r] : std::to_string(r));
    for (std::size_t v : report.confusion[r]) os << ',' << v;
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace screenleak
