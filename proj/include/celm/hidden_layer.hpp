#pragma once

// Input-to-hidden weight generation for the seven node strategies, and the
// sigmoid feature map H = sigmoid(X W + 1 b^T).
//
// Weight matrices are n x L: column j is the weight vector of hidden node j.
// Every generator consumes a single sequential RNG stream seeded from the
// caller's seed, so (strategy, seed, dataset) fixes the layer bit-for-bit.

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "celm/dataset.hpp"
#include "celm/error.hpp"
#include "celm/linalg.hpp"
#include "celm/rng.hpp"

namespace celm {

enum class StrategyKind : std::uint8_t { elm, orthogonal_elm, cdelm, selm, cselm, rselm, cmelm };

inline constexpr std::array<StrategyKind, 7> kAllStrategies{
    StrategyKind::elm,   StrategyKind::orthogonal_elm, StrategyKind::cdelm, StrategyKind::selm,
    StrategyKind::cselm, StrategyKind::rselm,          StrategyKind::cmelm};

/// Command-line / report name.
constexpr std::string_view strategy_name(StrategyKind k) noexcept {
  switch (k) {
    case StrategyKind::elm: return "elm";
    case StrategyKind::orthogonal_elm: return "oelm";
    case StrategyKind::cdelm: return "cdelm";
    case StrategyKind::selm: return "selm";
    case StrategyKind::cselm: return "cselm";
    case StrategyKind::rselm: return "rselm";
    case StrategyKind::cmelm: return "cmelm";
  }
  return "?";
}

inline std::string valid_strategy_names() {
  std::string out;
  for (auto k : kAllStrategies) {
    if (!out.empty()) out += ", ";
    out += strategy_name(k);
  }
  return out;
}

inline StrategyKind parse_strategy(std::string_view name) {
  for (auto k : kAllStrategies)
    if (strategy_name(k) == name) return k;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (valid: " + valid_strategy_names() + ")");
}

/// Strategies whose nodes pair samples across two different classes.
constexpr bool needs_two_classes(StrategyKind k) noexcept {
  return k == StrategyKind::cdelm || k == StrategyKind::cmelm;
}

/// Strategies that draw their weights from training samples.
constexpr bool uses_samples(StrategyKind k) noexcept {
  return k != StrategyKind::elm && k != StrategyKind::orthogonal_elm;
}

struct StrategySpec {
  StrategyKind kind = StrategyKind::elm;
  std::uint64_t seed = 0;
  std::size_t max_redraws = 1000;

  void validate() const {
    if (static_cast<std::size_t>(kind) >= kAllStrategies.size()) throw ConfigError("invalid strategy tag");
    if (max_redraws < 1) throw ConfigError("max_redraws must be at least 1");
  }
};

enum class Activation : std::uint8_t { sigmoid };

struct HiddenLayer {
  Matrix weights;  // n x L
  Vector biases;   // L
  Activation activation = Activation::sigmoid;

  Index inputs() const noexcept { return weights.rows(); }
  Index nodes() const noexcept { return weights.cols(); }
};

/// How a node's weight vector was built.
enum class NodeSource : std::uint8_t {
  random,            // elm / oelm
  sample,            // selm: one normalized sample
  same_class_sum,    // cselm / cmelm first half
  random_sum,        // rselm
  class_difference,  // cdelm / cmelm second half
};

/// Per-node record of the training rows a weight vector came from.
/// For class_difference, samples = {x_c1, x_c2} with x_c1 mapped to -1 and x_c2 to +1.
struct NodeOrigin {
  NodeSource source = NodeSource::random;
  std::vector<Index> samples;
};

using NodeProvenance = std::vector<NodeOrigin>;

struct GeneratedLayer {
  HiddenLayer layer;
  NodeProvenance provenance;
};

// ---------------------------------------------------------------------------

/// 1 / (1 + e^-z), evaluated without overflow. The result saturates at the
/// nearest doubles inside (0, 1) so every output is strictly in the open interval.
inline double sigmoid(double z) noexcept {
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - 0x1.0p-53;
  double v;
  if (z >= 0.0) {
    v = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    v = e / (1.0 + e);
  }
  return std::clamp(v, kLow, kHigh);
}

/// H[j][i] = sigmoid(w_i . x_j + b_i); N x L.
inline Matrix feature_map(const HiddenLayer& layer, const Matrix& x) {
  if (x.rows() == 0) return Matrix(0, layer.nodes());
  if (x.cols() != layer.inputs())
    throw UsageError("feature map expects " + std::to_string(layer.inputs()) + " input features, got " +
                     std::to_string(x.cols()));
  Matrix h = x * layer.weights;
  h.rowwise() += layer.biases.transpose();
  return h.unaryExpr([](double z) { return sigmoid(z); });
}

// ---------------------------------------------------------------------------

namespace detail {

inline void check_node_count(Index nodes) {
  if (nodes < 1) throw UsageError("hidden node count must be at least 1");
}

inline void check_samples(const Dataset& data) {
  if (data.empty()) throw ConfigError("weight generation needs a non-empty dataset");
  if (data.features() < 1) throw ConfigError("weight generation needs at least one feature");
}

struct NodeParams {
  Vector w;
  double b = 0.0;
  NodeOrigin origin;
};

/// Scaled between-class difference: w = 2 d / |d|^2 with d = x_c2 - x_c1 and
/// b = (x_c1 + x_c2).(x_c1 - x_c2) / |d|^2, so w.x_c1 + b = -1 and w.x_c2 + b = +1.
inline std::optional<NodeParams> difference_node(const Dataset& data, Index i1, Index i2) {
  const Vector x1 = data.sample(i1).transpose();
  const Vector x2 = data.sample(i2).transpose();
  const Vector d = x2 - x1;
  const double sq = d.squaredNorm();
  if (!(sq > 0.0) || !std::isfinite(sq)) return std::nullopt;
  NodeParams p;
  p.w = (2.0 / sq) * d;
  p.b = (x1 + x2).dot(x1 - x2) / sq;
  if (!p.w.allFinite() || !std::isfinite(p.b)) return std::nullopt;
  p.origin = {NodeSource::class_difference, {i1, i2}};
  return p;
}

/// Unit-normalized sum of the given rows (a single row for selm).
inline std::optional<NodeParams> unit_node(const Dataset& data, std::initializer_list<Index> rows, NodeSource src,
                                           Rng& rng) {
  Vector v = Vector::Zero(data.features());
  for (Index r : rows) v += data.sample(r).transpose();
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) return std::nullopt;
  NodeParams p;
  p.w = v / norm;
  p.b = uniform01(rng);
  p.origin = {src, std::vector<Index>(rows)};
  return p;
}

/// Retry `draw` until it yields a node or max_redraws attempts fail.
template <typename Draw>
NodeParams draw_node(Draw&& draw, std::size_t max_redraws, const char* what) {
  for (std::size_t attempt = 0; attempt < max_redraws; ++attempt)
    if (auto node = draw()) return std::move(*node);
  throw DegenerateDataError(std::string(what) + ": no usable node after " + std::to_string(max_redraws) +
                            " draws (all drawn vectors had zero norm)");
}

inline Index pick(Rng& rng, const std::vector<Index>& rows) {
  return rows[static_cast<std::size_t>(uniform_index(rng, rows.size()))];
}

inline NodeParams draw_difference(const Dataset& data, Rng& rng, std::size_t max_redraws) {
  const auto& members = data.class_index();
  const auto m = static_cast<std::uint64_t>(members.size());
  return draw_node(
      [&]() {
        // Unordered class pair uniformly among the m(m-1)/2 pairs.
        std::uint64_t p = uniform_index(rng, m * (m - 1) / 2);
        std::uint64_t a = 0;
        while (p >= m - 1 - a) {
          p -= m - 1 - a;
          ++a;
        }
        const std::uint64_t b = a + 1 + p;
        const Index i1 = pick(rng, members[a]);
        const Index i2 = pick(rng, members[b]);
        return difference_node(data, i1, i2);
      },
      max_redraws, "constrained difference");
}

inline NodeParams draw_same_class_sum(const Dataset& data, Rng& rng, std::size_t max_redraws) {
  const auto& members = data.class_index();
  return draw_node(
      [&]() {
        const auto& cls = members[static_cast<std::size_t>(uniform_index(rng, members.size()))];
        const Index i1 = pick(rng, cls);
        const Index i2 = pick(rng, cls);
        return unit_node(data, {i1, i2}, NodeSource::same_class_sum, rng);
      },
      max_redraws, "constrained sum");
}

inline GeneratedLayer assemble(std::vector<NodeParams> nodes, Index inputs) {
  GeneratedLayer out;
  const auto count = static_cast<Index>(nodes.size());
  out.layer.weights.resize(inputs, count);
  out.layer.biases.resize(count);
  out.provenance.reserve(nodes.size());
  for (Index j = 0; j < count; ++j) {
    out.layer.weights.col(j) = nodes[j].w;
    out.layer.biases(j) = nodes[j].b;
    out.provenance.push_back(std::move(nodes[j].origin));
  }
  return out;
}

inline void require_two_classes(const Dataset& data, const char* what) {
  if (data.num_classes() < 2)
    throw ConfigError(std::string(what) + " requires at least 2 classes, got " + std::to_string(data.num_classes()));
}

}  // namespace detail

/// Throws ConfigError when `data` cannot feed strategy `kind`.
inline void check_class_requirements(StrategyKind kind, const Dataset& data) {
  if (needs_two_classes(kind)) detail::require_two_classes(data, std::string(strategy_name(kind)).c_str());
}

/// Weights i.i.d. U[-1, 1], biases i.i.d. U[0, 1]. Weights are drawn node by
/// node, then all biases.
inline GeneratedLayer gen_elm(Index inputs, Index nodes, std::uint64_t seed) {
  if (inputs < 1) throw UsageError("input dimension must be at least 1");
  detail::check_node_count(nodes);
  auto rng = make_rng(seed);
  GeneratedLayer out;
  out.layer.weights.resize(inputs, nodes);
  out.layer.biases.resize(nodes);
  for (Index j = 0; j < nodes; ++j)
    for (Index i = 0; i < inputs; ++i) out.layer.weights(i, j) = uniform_real(rng, -1.0, 1.0);
  for (Index j = 0; j < nodes; ++j) out.layer.biases(j) = uniform01(rng);
  out.provenance.assign(static_cast<std::size_t>(nodes), NodeOrigin{});
  return out;
}

/// gen_elm followed by orthonormalization of the weight columns within
/// successive blocks of `inputs` columns (one block when nodes <= inputs) and
/// scaling of the bias vector to unit L2 norm.
inline GeneratedLayer gen_orthogonal_elm(Index inputs, Index nodes, std::uint64_t seed) {
  auto out = gen_elm(inputs, nodes, seed);
  Matrix& w = out.layer.weights;
  for (Index start = 0; start < nodes; start += inputs) {
    const Index width = std::min(inputs, nodes - start);
    Eigen::HouseholderQR<Matrix> qr(w.middleCols(start, width));
    w.middleCols(start, width) = qr.householderQ() * Matrix::Identity(inputs, width);
  }
  const double bn = out.layer.biases.norm();
  if (bn > 0.0) out.layer.biases /= bn;
  return out;
}

/// Between-class difference nodes. Each node picks an unordered class pair
/// uniformly, then one sample uniformly from each class.
inline GeneratedLayer gen_cdelm(const Dataset& data, Index nodes, std::uint64_t seed, std::size_t max_redraws = 1000) {
  detail::check_node_count(nodes);
  detail::check_samples(data);
  detail::require_two_classes(data, "cdelm");
  auto rng = make_rng(seed);
  std::vector<detail::NodeParams> params;
  params.reserve(static_cast<std::size_t>(nodes));
  for (Index j = 0; j < nodes; ++j) params.push_back(detail::draw_difference(data, rng, max_redraws));
  return detail::assemble(std::move(params), data.features());
}

/// Unit-normalized training samples with U[0, 1] biases.
inline GeneratedLayer gen_selm(const Dataset& data, Index nodes, std::uint64_t seed, std::size_t max_redraws = 1000) {
  detail::check_node_count(nodes);
  detail::check_samples(data);
  auto rng = make_rng(seed);
  const auto n = static_cast<std::uint64_t>(data.size());
  std::vector<detail::NodeParams> params;
  params.reserve(static_cast<std::size_t>(nodes));
  for (Index j = 0; j < nodes; ++j)
    params.push_back(detail::draw_node(
        [&]() {
          const auto i = static_cast<Index>(uniform_index(rng, n));
          return detail::unit_node(data, {i}, NodeSource::sample, rng);
        },
        max_redraws, "sample"));
  return detail::assemble(std::move(params), data.features());
}

/// Unit-normalized sums of two samples of one class (class chosen uniformly,
/// samples drawn with replacement), U[0, 1] biases.
inline GeneratedLayer gen_cselm(const Dataset& data, Index nodes, std::uint64_t seed, std::size_t max_redraws = 1000) {
  detail::check_node_count(nodes);
  detail::check_samples(data);
  auto rng = make_rng(seed);
  std::vector<detail::NodeParams> params;
  params.reserve(static_cast<std::size_t>(nodes));
  for (Index j = 0; j < nodes; ++j) params.push_back(detail::draw_same_class_sum(data, rng, max_redraws));
  return detail::assemble(std::move(params), data.features());
}

/// Unit-normalized sums of two samples drawn from the whole dataset.
inline GeneratedLayer gen_rselm(const Dataset& data, Index nodes, std::uint64_t seed, std::size_t max_redraws = 1000) {
  detail::check_node_count(nodes);
  detail::check_samples(data);
  auto rng = make_rng(seed);
  const auto n = static_cast<std::uint64_t>(data.size());
  std::vector<detail::NodeParams> params;
  params.reserve(static_cast<std::size_t>(nodes));
  for (Index j = 0; j < nodes; ++j)
    params.push_back(detail::draw_node(
        [&]() {
          const auto i1 = static_cast<Index>(uniform_index(rng, n));
          const auto i2 = static_cast<Index>(uniform_index(rng, n));
          return detail::unit_node(data, {i1, i2}, NodeSource::random_sum, rng);
        },
        max_redraws, "random sum"));
  return detail::assemble(std::move(params), data.features());
}

/// ceil(L/2) constrained-sum nodes followed by L - ceil(L/2) difference nodes.
inline GeneratedLayer gen_cmelm(const Dataset& data, Index nodes, std::uint64_t seed, std::size_t max_redraws = 1000) {
  detail::check_node_count(nodes);
  detail::check_samples(data);
  detail::require_two_classes(data, "cmelm");
  auto rng = make_rng(seed);
  const Index sums = (nodes + 1) / 2;
  std::vector<detail::NodeParams> params;
  params.reserve(static_cast<std::size_t>(nodes));
  for (Index j = 0; j < sums; ++j) params.push_back(detail::draw_same_class_sum(data, rng, max_redraws));
  for (Index j = sums; j < nodes; ++j) params.push_back(detail::draw_difference(data, rng, max_redraws));
  return detail::assemble(std::move(params), data.features());
}

/// Dispatch on spec.kind. `data` supplies the input dimension for elm/oelm
/// and the samples for the data-driven strategies.
inline GeneratedLayer generate(const StrategySpec& spec, const Dataset& data, Index nodes) {
  spec.validate();
  switch (spec.kind) {
    case StrategyKind::elm: return gen_elm(data.features(), nodes, spec.seed);
    case StrategyKind::orthogonal_elm: return gen_orthogonal_elm(data.features(), nodes, spec.seed);
    case StrategyKind::cdelm: return gen_cdelm(data, nodes, spec.seed, spec.max_redraws);
    case StrategyKind::selm: return gen_selm(data, nodes, spec.seed, spec.max_redraws);
    case StrategyKind::cselm: return gen_cselm(data, nodes, spec.seed, spec.max_redraws);
    case StrategyKind::rselm: return gen_rselm(data, nodes, spec.seed, spec.max_redraws);
    case StrategyKind::cmelm: return gen_cmelm(data, nodes, spec.seed, spec.max_redraws);
  }
  throw ConfigError("invalid strategy tag");
}

}  // namespace celm
