#pragma once

// Training and prediction for a sigmoid single-hidden-layer network whose
// output weights are solved in closed form, plus the binary model format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "celm/dataset.hpp"
#include "celm/error.hpp"
#include "celm/hidden_layer.hpp"
#include "celm/linalg.hpp"

namespace celm {

/// Ordered class identifiers; column k of the target matrix belongs to classes[k].
class LabelCodec {
 public:
  LabelCodec() = default;
  explicit LabelCodec(std::vector<ClassId> classes) : classes_(std::move(classes)) {
    for (std::size_t k = 0; k < classes_.size(); ++k)
      if (!lookup_.emplace(classes_[k], static_cast<int>(k)).second)
        throw ConfigError("duplicate class '" + classes_[k] + "' in label codec");
  }

  Index size() const noexcept { return static_cast<Index>(classes_.size()); }
  const std::vector<ClassId>& classes() const noexcept { return classes_; }
  const ClassId& decode(Index k) const { return classes_.at(static_cast<std::size_t>(k)); }

  int index_of(const ClassId& label) const {
    const auto it = lookup_.find(label);
    if (it == lookup_.end()) throw DataError("unknown class label '" + label + "'");
    return it->second;
  }

 private:
  std::vector<ClassId> classes_;
  std::map<ClassId, int> lookup_;
};

/// Row j: +1 in the column of labels[j], -1 elsewhere.
inline Matrix encode_labels(std::span<const ClassId> labels, const LabelCodec& codec) {
  Matrix t = Matrix::Constant(static_cast<Index>(labels.size()), codec.size(), -1.0);
  for (std::size_t j = 0; j < labels.size(); ++j) t(static_cast<Index>(j), codec.index_of(labels[j])) = 1.0;
  return t;
}

/// Row-wise argmax; ties go to the lowest class index.
inline std::vector<Index> argmax_rows(const Matrix& scores) {
  std::vector<Index> out(static_cast<std::size_t>(scores.rows()));
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

inline std::vector<ClassId> decode_scores(const Matrix& scores, const LabelCodec& codec) {
  std::vector<ClassId> out;
  out.reserve(static_cast<std::size_t>(scores.rows()));
  for (Index k : argmax_rows(scores)) out.push_back(codec.decode(k));
  return out;
}

struct TrainedModel {
  HiddenLayer hidden;
  Matrix beta;  // L x m
  LabelCodec codec;
  NormStats norm;
  StrategySpec strategy;
  std::optional<double> lambda;

  Index inputs() const noexcept { return norm.size(); }
  Index nodes() const noexcept { return hidden.nodes(); }
};

/// H * L above this many entries is refused before allocation (8 GiB of doubles).
inline constexpr double kMaxHiddenEntries = 1024.0 * 1024.0 * 1024.0;

/// Everything train() computes before the output solve. Cross-validation
/// reuses one of these across the whole lambda grid.
struct PreparedTraining {
  NormStats norm;
  GeneratedLayer generated;
  Matrix h;  // N x L on normalized training features
  Matrix t;  // N x m
  LabelCodec codec;
  StrategySpec strategy;
};

inline PreparedTraining prepare_training(const Dataset& data, const StrategySpec& strategy, Index nodes) {
  strategy.validate();
  if (data.empty()) throw ConfigError("training data is empty");
  if (nodes < 1) throw ConfigError("hidden node count must be at least 1");
  if (static_cast<double>(data.size()) * static_cast<double>(nodes) > kMaxHiddenEntries)
    throw ResourceError("hidden layer output of " + std::to_string(data.size()) + " x " + std::to_string(nodes) +
                        " exceeds the memory budget");
  PreparedTraining p;
  p.strategy = strategy;
  p.norm = normalize_fit(data);
  const Dataset normalized = data.with_features(normalize_apply(p.norm, data.x()));
  p.generated = generate(strategy, normalized, nodes);
  p.h = feature_map(p.generated.layer, normalized.x());
  p.codec = LabelCodec(data.classes());
  const auto labels = data.labels();
  p.t = encode_labels(labels, p.codec);
  return p;
}

/// Output weights: pseudoinverse without lambda, ridge otherwise.
inline Matrix solve_output_weights(const Matrix& h, const Matrix& t, std::optional<double> lambda) {
  return lambda ? solve_ridge(h, t, RidgeConfig(*lambda)) : solve_least_squares(h, t);
}

inline TrainedModel finish_training(const PreparedTraining& p, std::optional<double> lambda) {
  TrainedModel m;
  m.beta = solve_output_weights(p.h, p.t, lambda);
  m.hidden = p.generated.layer;
  m.codec = p.codec;
  m.norm = p.norm;
  m.strategy = p.strategy;
  m.lambda = lambda;
  return m;
}

/// Fit normalization on `data`, generate the hidden layer from the normalized
/// samples, and solve for the output weights.
inline TrainedModel train(const Dataset& data, const StrategySpec& strategy, Index nodes,
                          std::optional<double> lambda = std::nullopt) {
  if (lambda) (void)RidgeConfig(*lambda);  // reject a bad lambda before generating anything
  return finish_training(prepare_training(data, strategy, nodes), lambda);
}

/// Raw output scores H * beta for un-normalized inputs.
inline Matrix decision_scores(const TrainedModel& model, const Matrix& x) {
  if (x.rows() == 0) return Matrix(0, model.codec.size());
  if (x.cols() != model.inputs())
    throw UsageError("model expects " + std::to_string(model.inputs()) + " features, input has " +
                     std::to_string(x.cols()));
  return feature_map(model.hidden, normalize_apply(model.norm, x)) * model.beta;
}

inline std::vector<Index> predict_indices(const TrainedModel& model, const Matrix& x) {
  return argmax_rows(decision_scores(model, x));
}

inline std::vector<ClassId> predict(const TrainedModel& model, const Matrix& x) {
  return decode_scores(decision_scores(model, x), model.codec);
}

// ---------------------------------------------------------------------------
// Model file format, version 1. All integers and doubles little-endian.
//
//   char[8]  magic "CELMMODL"
//   u32      format version
//   u8       strategy tag, u8 activation tag, u8 has_lambda, u8 reserved
//   u64      seed, u64 max_redraws
//   f64      lambda (0 when absent)
//   u64      n (inputs), L (nodes), m (classes)
//   f64[n]   normalization mean, f64[n] normalization divisor
//   f64[n*L] W row-major, f64[L] biases, f64[L*m] beta row-major
//   m x { u32 byte length, bytes }  class identifiers

inline constexpr std::string_view kModelMagic = "CELMMODL";
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void raw(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void matrix_row_major(const Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : in_(bytes) {}

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(raw(1)[0]); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint_le(4)); }
  std::uint64_t u64() { return uint_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  Matrix matrix_row_major(std::uint64_t rows, std::uint64_t cols) {
    if (cols != 0 && rows > remaining() / 8 / cols) throw FormatError("model payload truncated");
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    return m;
  }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("model payload truncated");
  }
  std::uint64_t uint_le(int width) {
    const auto s = raw(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string save_model(const TrainedModel& model) {
  const auto n = static_cast<std::uint64_t>(model.inputs());
  const auto nodes = static_cast<std::uint64_t>(model.nodes());
  const auto m = static_cast<std::uint64_t>(model.codec.size());
  if (static_cast<std::uint64_t>(model.hidden.inputs()) != n || static_cast<std::uint64_t>(model.beta.rows()) != nodes ||
      static_cast<std::uint64_t>(model.beta.cols()) != m)
    throw UsageError("inconsistent model dimensions");
  detail::ByteWriter w;
  w.raw(kModelMagic);
  w.u32(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model.strategy.kind));
  w.u8(static_cast<std::uint8_t>(model.hidden.activation));
  w.u8(model.lambda ? 1 : 0);
  w.u8(0);
  w.u64(model.strategy.seed);
  w.u64(model.strategy.max_redraws);
  w.f64(model.lambda.value_or(0.0));
  w.u64(n);
  w.u64(nodes);
  w.u64(m);
  for (Index i = 0; i < model.norm.mean.size(); ++i) w.f64(model.norm.mean(i));
  for (Index i = 0; i < model.norm.scale.size(); ++i) w.f64(model.norm.scale(i));
  w.matrix_row_major(model.hidden.weights);
  for (Index j = 0; j < model.hidden.biases.size(); ++j) w.f64(model.hidden.biases(j));
  w.matrix_row_major(model.beta);
  for (const auto& cls : model.codec.classes()) {
    w.u32(static_cast<std::uint32_t>(cls.size()));
    w.raw(cls);
  }
  return w.take();
}

inline TrainedModel load_model(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kModelMagic.size() || r.raw(kModelMagic.size()) != kModelMagic)
    throw FormatError("not a model file (bad magic header)");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw FormatError("unsupported model format version " + std::to_string(version) + " (this build reads version " +
                      std::to_string(kModelVersion) + ")");
  TrainedModel model;
  const std::uint8_t kind = r.u8();
  if (kind >= kAllStrategies.size()) throw FormatError("unknown strategy tag " + std::to_string(kind));
  model.strategy.kind = static_cast<StrategyKind>(kind);
  if (r.u8() != static_cast<std::uint8_t>(Activation::sigmoid)) throw FormatError("unknown activation tag");
  const bool has_lambda = r.u8() != 0;
  r.u8();
  model.strategy.seed = r.u64();
  model.strategy.max_redraws = static_cast<std::size_t>(r.u64());
  const double lambda = r.f64();
  if (has_lambda) model.lambda = lambda;
  const std::uint64_t n = r.u64(), nodes = r.u64(), m = r.u64();
  model.norm.mean = r.matrix_row_major(n, 1);
  model.norm.scale = r.matrix_row_major(n, 1);
  model.hidden.weights = r.matrix_row_major(n, nodes);
  model.hidden.biases = r.matrix_row_major(nodes, 1);
  model.beta = r.matrix_row_major(nodes, m);
  std::vector<ClassId> classes;
  for (std::uint64_t k = 0; k < m; ++k) {
    const std::uint32_t len = r.u32();
    classes.emplace_back(r.raw(len));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after model payload");
  try {
    model.codec = LabelCodec(std::move(classes));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  return model;
}

inline void save_model_file(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  const auto bytes = save_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline TrainedModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return load_model(bytes);
}

}  // namespace celm
