#include "glsmul/model.hpp"

#include "glsmul/eval.hpp"
#include "glsmul/objectives.hpp"
#include "glsmul/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace glsmul {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<AffineLayer*> all_layers(MulParams& p) {
  std::vector<AffineLayer*> out;
  for (auto& l : p.transform) out.push_back(&l);
  out.push_back(&p.classifier);
  return out;
}

std::vector<const AffineLayer*> all_layers(const MulParams& p) {
  std::vector<const AffineLayer*> out;
  for (const auto& l : p.transform) out.push_back(&l);
  out.push_back(&p.classifier);
  return out;
}

Matrix apply_layer(const AffineLayer& layer, const Matrix& x) {
  Matrix h = x * layer.weight.transpose();
  h.rowwise() += layer.bias.transpose();
  if (layer.activation == Activation::tanh) h = h.array().tanh().matrix();
  return h;
}

// p <- p + alpha * g
void axpy(MulParams& p, double alpha, const MulParams& g) {
  auto dst = all_layers(p);
  auto src = all_layers(g);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i]->weight += alpha * src[i]->weight;
    dst[i]->bias += alpha * src[i]->bias;
  }
}

void add_into(MulParams& acc, const MulParams& g) { axpy(acc, 1.0, g); }

double accuracy_of(const Matrix& logits, std::span<const int> labels) {
  return accuracy(argmax_rows(logits), labels);
}

struct Evaluation {
  double value = 0.0;
  MulParams grad;
};

// Halving line search: tries lr, lr/2, ... and accepts the first step that
// does not increase the objective. Returns the accepted step, 0 if none.
template <typename Objective>
double line_search_step(MulParams& params, const Evaluation& current, double lr,
                        int max_halvings, Objective&& value_at) {
  double step = lr;
  for (int h = 0; h <= max_halvings; ++h) {
    MulParams candidate = params;
    axpy(candidate, -step, current.grad);
    const double v = value_at(candidate);
    if (std::isfinite(v) && v <= current.value) {
      params = std::move(candidate);
      return step;
    }
    step *= 0.5;
  }
  return 0.0;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint32_t read_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw Error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw Error("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr char kMagic[8] = {'G', 'L', 'S', 'M', 'U', 'L', 'C', 'K'};

}  // namespace

MulParams MulParams::initialize(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim < 1 || arch.embedding_dim < 1 || arch.num_classes < 1) {
    throw Error("MulParams::initialize: invalid architecture");
  }
  CounterRng rng(seed, "model.init");
  auto make = [&rng](Index in, Index out, Activation act) {
    AffineLayer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    layer.weight.resize(out, in);
    for (Index i = 0; i < out; ++i) {
      for (Index j = 0; j < in; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
    }
    layer.bias.resize(out);
    for (Index i = 0; i < out; ++i) layer.bias(i) = rng.uniform(-bound, bound);
    layer.activation = act;
    return layer;
  };
  MulParams p;
  Index width = arch.input_dim;
  for (Index h : arch.hidden) {
    if (h < 1) throw Error("MulParams::initialize: hidden width must be >= 1");
    p.transform.push_back(make(width, h, Activation::tanh));
    width = h;
  }
  p.transform.push_back(make(width, arch.embedding_dim, Activation::identity));
  p.classifier = make(arch.embedding_dim, arch.num_classes, Activation::identity);
  return p;
}

Index MulParams::input_dim() const {
  return transform.empty() ? classifier.in_dim() : transform.front().in_dim();
}

Index MulParams::embedding_dim() const { return classifier.in_dim(); }

int MulParams::num_classes() const { return static_cast<int>(classifier.out_dim()); }

Index MulParams::parameter_count() const {
  Index n = 0;
  for (const AffineLayer* l : all_layers(*this)) n += l->weight.size() + l->bias.size();
  return n;
}

Vector MulParams::flatten() const {
  Vector flat(parameter_count());
  Index pos = 0;
  for (const AffineLayer* l : all_layers(*this)) {
    for (Index i = 0; i < l->weight.rows(); ++i) {
      for (Index j = 0; j < l->weight.cols(); ++j) flat(pos++) = l->weight(i, j);
    }
    flat.segment(pos, l->bias.size()) = l->bias;
    pos += l->bias.size();
  }
  return flat;
}

void MulParams::assign(const Vector& flat) {
  if (flat.size() != parameter_count()) throw Error("MulParams::assign: size mismatch");
  Index pos = 0;
  for (AffineLayer* l : all_layers(*this)) {
    for (Index i = 0; i < l->weight.rows(); ++i) {
      for (Index j = 0; j < l->weight.cols(); ++j) l->weight(i, j) = flat(pos++);
    }
    l->bias = flat.segment(pos, l->bias.size());
    pos += l->bias.size();
  }
}

MulParams MulParams::zeros_like() const {
  MulParams z = *this;
  for (AffineLayer* l : all_layers(z)) {
    l->weight.setZero();
    l->bias.setZero();
  }
  return z;
}

void MulParams::validate() const {
  Index width = input_dim();
  for (const AffineLayer* l : all_layers(*this)) {
    if (l->in_dim() != width) throw Error("MulParams: layer shapes do not chain");
    if (l->bias.size() != l->out_dim()) throw Error("MulParams: bias length mismatch");
    require_finite(l->weight, "MulParams");
    require_finite(l->bias, "MulParams");
    width = l->out_dim();
  }
}

ForwardPass forward(const MulParams& params, const Matrix& x) {
  if (x.cols() != params.input_dim()) {
    throw Error("forward: input width " + std::to_string(x.cols()) + " does not match " +
                std::to_string(params.input_dim()));
  }
  require_finite(x, "forward");
  ForwardPass pass;
  pass.activations.reserve(params.transform.size() + 1);
  pass.activations.push_back(x);
  for (const AffineLayer& layer : params.transform) {
    pass.activations.push_back(apply_layer(layer, pass.activations.back()));
  }
  pass.z = pass.activations.back();
  pass.logits = apply_layer(params.classifier, pass.z);
  return pass;
}

MulParams backward(const MulParams& params, const ForwardPass& pass, const Matrix& grad_z,
                   const Matrix* grad_logits) {
  MulParams grad = params.zeros_like();
  if (grad_z.rows() != pass.z.rows() || grad_z.cols() != pass.z.cols()) {
    throw Error("backward: grad_z shape mismatch");
  }
  Matrix upstream = grad_z;
  if (grad_logits != nullptr) {
    if (grad_logits->rows() != pass.logits.rows() || grad_logits->cols() != pass.logits.cols()) {
      throw Error("backward: grad_logits shape mismatch");
    }
    grad.classifier.weight = grad_logits->transpose() * pass.z;
    grad.classifier.bias = grad_logits->colwise().sum().transpose();
    upstream += (*grad_logits) * params.classifier.weight;
  }
  for (std::size_t l = params.transform.size(); l-- > 0;) {
    const AffineLayer& layer = params.transform[l];
    const Matrix& out = pass.activations[l + 1];
    const Matrix& in = pass.activations[l];
    Matrix pre_grad = upstream;
    if (layer.activation == Activation::tanh) {
      pre_grad = pre_grad.cwiseProduct((1.0 - out.array().square()).matrix());
    }
    grad.transform[l].weight = pre_grad.transpose() * in;
    grad.transform[l].bias = pre_grad.colwise().sum().transpose();
    if (l > 0) upstream = pre_grad * layer.weight;
  }
  return grad;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const Eigen::RowVectorXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
    p.row(i) = e / e.sum();
  }
  return p;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> PseudoLabels::dense(Index n) const {
  std::vector<int> out(static_cast<std::size_t>(n), kUnlabeled);
  for (std::size_t k = 0; k < indices.size(); ++k) out[static_cast<std::size_t>(indices[k])] = labels[k];
  return out;
}

PseudoLabels pseudo_label(const Matrix& logits, double tau) {
  require_finite(logits, "pseudo_label");
  const Matrix probs = softmax_rows(logits);
  const std::vector<int> top = argmax_rows(probs);
  PseudoLabels out;
  for (Index i = 0; i < probs.rows(); ++i) {
    const int y = top[static_cast<std::size_t>(i)];
    if (probs(i, y) > tau) {
      out.indices.push_back(i);
      out.labels.push_back(y);
    }
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw Error("TrainConfig: tau must lie in (0, 1)");
  if (pretrain_epochs < 0 || adapt_epochs < 0) throw Error("TrainConfig: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw Error("TrainConfig: learning rate must be > 0");
  if (!(epsilon > 0.0)) throw Error("TrainConfig: epsilon must be > 0");
  if (epsilon_exponent && !(*epsilon_exponent > 0.0)) {
    throw Error("TrainConfig: epsilon exponent must be > 0");
  }
  if (lambda_tu < 0.0 || lambda_du < 0.0) throw Error("TrainConfig: lambdas must be >= 0");
  if (feature_bandwidth && !(*feature_bandwidth > 0.0)) {
    throw Error("TrainConfig: feature bandwidth must be > 0");
  }
  if (embedding_dim < 1) throw Error("TrainConfig: embedding dimension must be >= 1");
  if (max_halvings < 0 || stability_window < 1) throw Error("TrainConfig: invalid line-search settings");
  label_kernel.validate();
}

PretrainResult pretrain(const MulParams& params, const FeatureSet& source,
                        const TrainConfig& config, const std::optional<TargetMonitor>& monitor,
                        int first_epoch) {
  config.validate();
  source.validate();
  params.validate();
  if (!source.fully_labeled()) throw Error("pretrain: source must be fully labeled");
  const std::vector<int>& ys = *source.labels;
  const ClassWeights ones = ClassWeights::uniform(params.num_classes());

  PretrainResult result{params, {}};
  auto evaluate = [&](const MulParams& p, bool with_grad) {
    const ForwardPass pass = forward(p, source.features);
    const LossBundle e = loss_e(pass.logits, ys, ones);
    Evaluation ev;
    ev.value = e.value;
    if (with_grad) {
      ev.grad = backward(p, pass, Matrix::Zero(pass.z.rows(), pass.z.cols()), &*e.grad_logits);
    }
    return std::make_pair(ev, pass.logits);
  };

  for (int t = 0; t < config.pretrain_epochs; ++t) {
    auto [current, logits] = evaluate(result.params, true);
    if (!std::isfinite(current.value)) {
      throw TrainingError("pretrain: diverged", result.trace);
    }
    EpochRecord rec;
    rec.epoch = first_epoch + t;
    rec.stage = Stage::pretrain;
    rec.j_e = current.value;
    rec.acc_s = accuracy_of(logits, ys);
    rec.acc_t = monitor ? accuracy_of(forward(result.params, monitor->features).logits,
                                      monitor->oracle_labels)
                        : kNaN;
    rec.w = ones.importance;
    rec.p_t = ones.target_prior;
    rec.step = line_search_step(result.params, current, config.learning_rate,
                                config.max_halvings,
                                [&](const MulParams& p) { return evaluate(p, false).first.value; });
    result.trace.epochs.push_back(std::move(rec));
  }
  return result;
}

AdaptResult adapt(const MulParams& params, const FeatureSet& source, const FeatureSet& target,
                  const TrainConfig& config, const std::optional<TargetMonitor>& monitor,
                  int first_epoch) {
  config.validate();
  source.validate();
  target.validate();
  params.validate();
  if (!source.fully_labeled()) throw Error("adapt: source must be fully labeled");
  if (target.labels &&
      std::any_of(target.labels->begin(), target.labels->end(), [](int y) { return y != kUnlabeled; })) {
    throw Error("adapt: target must be unlabeled");
  }
  const int c = params.num_classes();
  const std::vector<int>& ys = *source.labels;
  const Index ns = source.size();
  const Index nt = target.size();
  const double epsilon =
      config.epsilon_exponent
          ? std::pow(static_cast<double>(std::max(ns, nt)), -*config.epsilon_exponent)
          : config.epsilon;

  AdaptResult result;
  result.params = params;
  std::vector<double> du_history;
  bool du_includes_target = false;

  for (int t = 0; t < config.adapt_epochs; ++t) {
    try {
      const ForwardPass fs = forward(result.params, source.features);
      const ForwardPass ft = forward(result.params, target.features);
      const std::vector<int> preds_s = argmax_rows(fs.logits);
      const std::vector<int> preds_t = argmax_rows(ft.logits);

      ShiftEstimate shift = estimate_shift(preds_s, ys, preds_t, c);
      ClassWeights weights{shift.w, shift.p_t};
      // BBSE guarantees w.p_s = 1 only to rounding; renormalize the prior.
      weights.target_prior /= weights.target_prior.sum();

      const PseudoLabels confident = pseudo_label(ft.logits, config.tau);
      const std::vector<int> confident_dense = confident.dense(nt);
      const std::vector<int> tu_labels =
          config.tu_targets == TuTargets::all ? preds_t : confident_dense;
      const std::vector<int> du_labels =
          du_includes_target ? confident_dense : std::vector<int>(static_cast<std::size_t>(nt), kUnlabeled);

      DiscrepancyConfig disc;
      disc.num_classes = c;
      disc.epsilon = epsilon;
      disc.label_kernel = config.label_kernel;
      double bandwidth = 1.0;
      if (config.feature_kernel != KernelFamily::linear) {
        if (config.feature_bandwidth) {
          bandwidth = *config.feature_bandwidth;
        } else {
          Matrix pooled(ns + nt, fs.z.cols());
          pooled << fs.z, ft.z;
          bandwidth = median_bandwidth(pooled);
        }
      }
      disc.feature_kernel = {config.feature_kernel, bandwidth};

      auto objective = [&](const MulParams& p, bool with_grad, MulLoss* parts) {
        const ForwardPass ps = forward(p, source.features);
        const ForwardPass pt = forward(p, target.features);
        const MulInputs in{ps.z, ys, ps.logits, pt.z, tu_labels, du_labels, weights, disc};
        MulLoss loss = loss_mul(in, config.lambda_tu, config.lambda_du);
        Evaluation ev;
        ev.value = loss.total.value;
        if (with_grad) {
          ev.grad = backward(p, ps, loss.total.grad_source, &*loss.total.grad_logits);
          add_into(ev.grad, backward(p, pt, loss.total.grad_target, nullptr));
        }
        if (parts != nullptr) *parts = std::move(loss);
        return ev;
      };

      MulLoss parts;
      const Evaluation current = objective(result.params, true, &parts);
      if (!std::isfinite(current.value)) throw Error("adapt: diverged");

      EpochRecord rec;
      rec.epoch = first_epoch + t;
      rec.stage = Stage::adapt;
      rec.j_e = parts.j_e;
      rec.j_tu = parts.j_tu;
      rec.j_du = parts.j_du;
      rec.acc_s = accuracy(preds_s, ys);
      rec.acc_t = monitor ? accuracy_of(forward(result.params, monitor->features).logits,
                                        monitor->oracle_labels)
                          : kNaN;
      rec.n_pseudo = static_cast<int>(confident.indices.size());
      rec.bandwidth = bandwidth;
      rec.w = shift.w;
      rec.p_t = weights.target_prior;
      rec.step = line_search_step(
          result.params, current, config.learning_rate, config.max_halvings,
          [&](const MulParams& p) { return objective(p, false, nullptr).value; });

      if (!du_includes_target && config.lambda_du != 0.0) {
        du_history.push_back(parts.j_du);
        const auto w = static_cast<std::size_t>(config.stability_window);
        if (du_history.size() > w) {
          const double ref = du_history[du_history.size() - 1 - w];
          double worst = 0.0;
          for (std::size_t k = du_history.size() - w; k < du_history.size(); ++k) {
            worst = std::max(worst, std::abs(du_history[k] - ref));
          }
          if (ref != 0.0 && worst / std::abs(ref) < config.stability_tolerance) {
            du_includes_target = true;
          }
        }
      }

      result.shifts.push_back(std::move(shift));
      result.trace.epochs.push_back(std::move(rec));
    } catch (const TrainingError&) {
      throw;
    } catch (const Error& e) {
      throw TrainingError(e.what(), result.trace);
    }
  }

  const std::vector<int> final_s = argmax_rows(forward(result.params, source.features).logits);
  const std::vector<int> final_t = argmax_rows(forward(result.params, target.features).logits);
  result.final_shift = estimate_shift(final_s, ys, final_t, c);
  return result;
}

void save_checkpoint(const std::string& path, const MulParams& params) {
  params.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(params.transform.size()));
  for (const AffineLayer* l : all_layers(params)) {
    write_u32(os, static_cast<std::uint32_t>(l->out_dim()));
    write_u32(os, static_cast<std::uint32_t>(l->in_dim()));
    write_u32(os, static_cast<std::uint32_t>(l->activation));
  }
  for (const AffineLayer* l : all_layers(params)) {
    for (Index i = 0; i < l->weight.rows(); ++i) {
      for (Index j = 0; j < l->weight.cols(); ++j) write_f64(os, l->weight(i, j));
    }
    for (Index i = 0; i < l->bias.size(); ++i) write_f64(os, l->bias(i));
  }
  if (!os) throw Error("checkpoint: write failed for '" + path + "'");
}

MulParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open '" + path + "'");
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error("checkpoint: bad magic in '" + path + "'");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t n_transform = read_u32(is);
  if (n_transform > 1024) throw Error("checkpoint: implausible layer count");
  MulParams p;
  p.transform.resize(n_transform);
  for (AffineLayer* l : all_layers(p)) {
    const std::uint32_t out = read_u32(is);
    const std::uint32_t in = read_u32(is);
    const std::uint32_t act = read_u32(is);
    if (act > 1 || out == 0 || in == 0 || out > (1u << 20) || in > (1u << 20)) {
      throw Error("checkpoint: corrupt layer header");
    }
    l->weight.resize(out, in);
    l->bias.resize(out);
    l->activation = static_cast<Activation>(act);
  }
  for (AffineLayer* l : all_layers(p)) {
    for (Index i = 0; i < l->weight.rows(); ++i) {
      for (Index j = 0; j < l->weight.cols(); ++j) l->weight(i, j) = read_f64(is);
    }
    for (Index i = 0; i < l->bias.size(); ++i) l->bias(i) = read_f64(is);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw Error("checkpoint: trailing bytes");
  p.validate();
  return p;
}

}  // namespace glsmul
