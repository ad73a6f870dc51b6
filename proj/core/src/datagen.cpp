#include "glsmul/datagen.hpp"

#include "glsmul/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace glsmul {

namespace {

void check_prior(const Vector& p, int c, const char* which) {
  if (p.size() != c) throw Error(std::string("GlsScenario: ") + which + " prior has wrong length");
  if (!p.allFinite() || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-10) {
    throw Error(std::string("GlsScenario: ") + which + " prior is not a simplex vector");
  }
}

void check_conditionals(const std::vector<ClassConditional>& cc, Index d, const char* which) {
  for (const ClassConditional& k : cc) {
    if (k.mean.size() != d || k.covariance.rows() != d || k.covariance.cols() != d) {
      throw Error(std::string("GlsScenario: ") + which + " class dimension mismatch");
    }
    require_finite(k.covariance, "GlsScenario covariance");
    require_finite(k.mean, "GlsScenario mean");
    if (!is_symmetric(k.covariance)) throw Error("GlsScenario: covariance is asymmetric");
    Eigen::LLT<Matrix> llt(k.covariance);
    if (llt.info() != Eigen::Success) throw Error("GlsScenario: covariance is not SPD");
  }
}

ClassConditional isotropic(std::initializer_list<double> mean, double sigma) {
  ClassConditional k;
  k.mean = Vector(static_cast<Index>(mean.size()));
  Index i = 0;
  for (double v : mean) k.mean(i++) = v;
  k.covariance = sigma * sigma * Matrix::Identity(k.mean.size(), k.mean.size());
  return k;
}

std::vector<ClassConditional> translated(std::vector<ClassConditional> cc, const Vector& shift) {
  for (ClassConditional& k : cc) k.mean += shift;
  return cc;
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

void draw_domain(const std::vector<ClassConditional>& cc, const Vector& prior, Index n,
                 CounterRng& label_rng, CounterRng& feature_rng, Matrix& x,
                 std::vector<int>& y) {
  const Index d = cc.front().mean.size();
  std::vector<Matrix> chol;
  chol.reserve(cc.size());
  for (const ClassConditional& k : cc) chol.push_back(Eigen::LLT<Matrix>(k.covariance).matrixL());
  const std::vector<double> weights(prior.data(), prior.data() + prior.size());
  x.resize(n, d);
  y.resize(static_cast<std::size_t>(n));
  Vector noise(d);
  for (Index i = 0; i < n; ++i) {
    const int label = label_rng.categorical(weights);
    y[static_cast<std::size_t>(i)] = label;
    for (Index j = 0; j < d; ++j) noise(j) = feature_rng.normal();
    x.row(i) = (cc[static_cast<std::size_t>(label)].mean + chol[static_cast<std::size_t>(label)] * noise)
                   .transpose();
  }
}

Vector frequencies(const std::vector<int>& y, int c) {
  Vector f = Vector::Zero(c);
  for (int v : y) f(v) += 1.0;
  return y.empty() ? f : Vector(f / static_cast<double>(y.size()));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void GlsScenario::validate() const {
  const int c = num_classes();
  if (c < 1) throw Error("GlsScenario: no classes");
  if (static_cast<int>(target.size()) != c) throw Error("GlsScenario: class count mismatch");
  const Index d = dim();
  if (d < 1) throw Error("GlsScenario: zero-dimensional features");
  check_conditionals(source, d, "source");
  check_conditionals(target, d, "target");
  check_prior(source_prior, c, "source");
  check_prior(target_prior, c, "target");
  if (n_source < 1 || n_target < 1) throw Error("GlsScenario: sample counts must be >= 1");
}

std::vector<std::string> scenario_names() { return {"null", "g1", "g2"}; }

GlsScenario named_scenario(const std::string& name, std::uint64_t seed) {
  GlsScenario s;
  s.name = name;
  s.seed = seed;
  s.n_source = 600;
  s.n_target = 600;
  if (name == "null" || name == "g1") {
    s.source = {isotropic({0.0, 0.0}, 0.5), isotropic({2.0, 2.0}, 0.5),
                isotropic({4.0, 4.0}, 0.5)};
    s.source_prior = vec({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    if (name == "null") {
      s.target = s.source;
      s.target_prior = s.source_prior;
    } else {
      s.target = translated(s.source, vec({1.5, 0.0}));
      s.target_prior = vec({0.6, 0.3, 0.1});
    }
  } else if (name == "g2") {
    s.source = {isotropic({0.0, 0.0}, 0.5), isotropic({3.0, 0.0}, 0.5),
                isotropic({0.0, 3.0}, 0.5), isotropic({3.0, 3.0}, 0.5)};
    s.target = translated(s.source, vec({0.75, 0.0}));
    s.source_prior = Vector::Constant(4, 0.25);
    s.target_prior = vec({0.5, 0.5, 0.0, 0.0});
  } else {
    throw Error("unknown scenario '" + name + "' (expected null, g1 or g2)");
  }
  return s;
}

GlsSample synth_gls(const GlsScenario& scenario) {
  scenario.validate();
  const int c = scenario.num_classes();
  GlsSample out;

  CounterRng src_labels(scenario.seed, "datagen.source.labels");
  CounterRng src_features(scenario.seed, "datagen.source.features");
  CounterRng tgt_labels(scenario.seed, "datagen.target.labels");
  CounterRng tgt_features(scenario.seed, "datagen.target.features");

  std::vector<int> ys;
  draw_domain(scenario.source, scenario.source_prior, scenario.n_source, src_labels, src_features,
              out.source.features, ys);
  draw_domain(scenario.target, scenario.target_prior, scenario.n_target, tgt_labels, tgt_features,
              out.target.features, out.target_oracle);

  out.source_prior_empirical = frequencies(ys, c);
  out.target_prior_empirical = frequencies(out.target_oracle, c);
  out.source.labels = std::move(ys);
  out.source.num_classes = c;
  out.target.num_classes = c;
  out.mean_shift.resize(c, scenario.dim());
  for (int k = 0; k < c; ++k) {
    out.mean_shift.row(k) = (scenario.target[static_cast<std::size_t>(k)].mean -
                             scenario.source[static_cast<std::size_t>(k)].mean)
                                .transpose();
  }
  return out;
}

FeatureSet load_features(const std::string& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feature file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ":1: missing header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const std::vector<std::string> header = split_commas(trim(line));
  if (header.size() < 2 || trim(header.back()) != "label") {
    throw Error(path + ":1: header must be f0,...,f{d-1},label");
  }
  const auto d = static_cast<Index>(header.size() - 1);
  for (Index j = 0; j < d; ++j) {
    if (trim(header[static_cast<std::size_t>(j)]) != "f" + std::to_string(j)) {
      throw Error(path + ":1: expected column f" + std::to_string(j));
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const std::vector<std::string> cells = split_commas(row);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (static_cast<Index>(cells.size()) != d + 1) {
      throw Error(where + "expected " + std::to_string(d + 1) + " fields, found " +
                  std::to_string(cells.size()));
    }
    for (Index j = 0; j < d; ++j) {
      const std::string cell = trim(cells[static_cast<std::size_t>(j)]);
      double v = 0.0;
      const char* first = cell.data();
      const char* last = first + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw Error(where + "malformed value '" + cell + "' in column f" + std::to_string(j));
      }
      values.push_back(v);
    }
    const std::string cell = trim(cells.back());
    int y = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), y);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || y < kUnlabeled) {
      throw Error(where + "malformed label '" + cell + "'");
    }
    labels.push_back(y);
  }

  FeatureSet set;
  const auto n = static_cast<Index>(labels.size());
  set.features.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) set.features(i, j) = values[static_cast<std::size_t>(i * d + j)];
  }
  const int max_label = labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
  if (num_classes > 0 && max_label >= num_classes) {
    throw Error(path + ": label " + std::to_string(max_label) + " exceeds class count " +
                std::to_string(num_classes));
  }
  set.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  if (max_label >= 0) set.labels = std::move(labels);
  return set;
}

void save_features(const std::string& path, const FeatureSet& set,
                   const std::vector<int>* labels_override) {
  const Index n = set.size();
  const std::vector<int>* labels = labels_override ? labels_override : (set.labels ? &*set.labels : nullptr);
  if (labels && static_cast<Index>(labels->size()) != n) throw Error("save_features: label count mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (Index j = 0; j < set.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[32];
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < set.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", set.features(i, j));
      out << buf << ',';
    }
    out << (labels ? (*labels)[static_cast<std::size_t>(i)] : kUnlabeled) << '\n';
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace glsmul
