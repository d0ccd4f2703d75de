#include "cardiostrain/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace cardiostrain {

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

void MlpModel::validate() const {
  if (layer_sizes.size() < 2) throw DimensionError("model needs at least input and output layers");
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
    throw DimensionError("layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1])
      throw DimensionError("layer dims do not chain");
    if (!weights[l].allFinite() || !biases[l].allFinite()) throw NumericalError("non-finite weights");
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (views < 1) throw ConfigError("views must be >= 1");
  if (static_cast<std::size_t>(output_dim()) != patch_dims.length() ||
      static_cast<std::size_t>(input_dim()) != patch_dims.length() * views)
    throw DimensionError("model dims inconsistent with patch dims");
}

MlpModel make_mlp(const MlpArchitecture& arch, std::uint64_t seed) {
  if (arch.hidden_layers < 0 || (arch.hidden_layers > 0 && arch.hidden_width < 1))
    throw ConfigError("invalid hidden layer configuration");
  MlpModel m;
  m.patch_dims = arch.patch_dims;
  m.spacing = arch.spacing;
  m.views = arch.views;
  m.dropout_p = arch.dropout_p;
  const int d = static_cast<int>(arch.patch_dims.length());
  m.layer_sizes.push_back(d * arch.views);
  for (int l = 0; l < arch.hidden_layers; ++l) m.layer_sizes.push_back(arch.hidden_width);
  m.layer_sizes.push_back(d);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const double sd = std::sqrt(2.0 / m.layer_sizes[l]);
    Eigen::MatrixXd W(m.layer_sizes[l + 1], m.layer_sizes[l]);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = sd * normal(rng);
    m.weights.push_back(std::move(W));
    m.biases.push_back(Eigen::VectorXd::Zero(m.layer_sizes[l + 1]));
  }
  m.validate();
  return m;
}

ForwardCache forward_batch(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           std::mt19937_64* dropout_rng) {
  if (inputs.rows() != model.input_dim()) throw DimensionError("input length != model input dim");
  const bool drop = dropout_rng != nullptr && model.dropout_p > 0.0;
  const std::size_t L = model.weights.size();
  ForwardCache cache;
  cache.activations.reserve(L);
  cache.activations.push_back(inputs * model.input_scale);

  std::bernoulli_distribution keep(1.0 - model.dropout_p);
  const double inv_keep = 1.0 / (1.0 - model.dropout_p);
  for (std::size_t l = 0; l + 1 < L; ++l) {
    Eigen::MatrixXd h = model.weights[l] * cache.activations.back();
    h.colwise() += model.biases[l];
    h = h.cwiseMax(0.0);
    if (drop) {
      Eigen::MatrixXd mask(h.rows(), h.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*dropout_rng) ? inv_keep : 0.0;
      h.array() *= mask.array();
      cache.dropout.push_back(std::move(mask));
    }
    cache.activations.push_back(std::move(h));
  }
  cache.output = model.weights[L - 1] * cache.activations.back();
  cache.output.colwise() += model.biases[L - 1];
  cache.output /= model.input_scale;
  return cache;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input,
                        std::mt19937_64* dropout_rng) {
  if (input.size() != model.input_dim()) throw DimensionError("input length != model input dim");
  return forward_batch(model, input, dropout_rng).output.col(0);
}

Eigen::MatrixXd hidden_activations(const MlpModel& model,
                                   const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                   int layer_index) {
  if (layer_index < 0 || layer_index >= model.hidden_layers())
    throw DimensionError("hidden layer index out of range");
  if (inputs.rows() != model.input_dim()) throw DimensionError("input length != model input dim");
  Eigen::MatrixXd a = inputs * model.input_scale;
  for (int l = 0; l <= layer_index; ++l) {
    Eigen::MatrixXd h = model.weights[l] * a;
    h.colwise() += model.biases[l];
    a = h.cwiseMax(0.0);
  }
  return a.transpose();
}

Eigen::VectorXd flatten_parameters(const MlpModel& model) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto& W = model.weights[l];
    flat.segment(pos, W.size()) = Eigen::Map<const Eigen::VectorXd>(W.data(), W.size());
    pos += W.size();
    flat.segment(pos, model.biases[l].size()) = model.biases[l];
    pos += model.biases[l].size();
  }
  return flat;
}

void assign_parameters(MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != static_cast<Eigen::Index>(model.parameter_count()))
    throw DimensionError("parameter vector length mismatch");
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    auto& W = model.weights[l];
    Eigen::Map<Eigen::VectorXd>(W.data(), W.size()) = flat.segment(pos, W.size());
    pos += W.size();
    model.biases[l] = flat.segment(pos, model.biases[l].size());
    pos += model.biases[l].size();
  }
}

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'L', 'P', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const MlpModel& model) {
  model.validate();
  os.write(kCheckpointMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(model.layer_sizes.size()));
  for (int s : model.layer_sizes) put<std::uint32_t>(os, static_cast<std::uint32_t>(s));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(model.views));
  for (int v : {model.patch_dims.sx, model.patch_dims.sy, model.patch_dims.sz, model.patch_dims.frames})
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  for (int a = 0; a < 3; ++a) put<double>(os, model.spacing[a]);
  put<double>(os, model.dropout_p);
  put<double>(os, model.input_scale);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> W = model.weights[l];
    os.write(reinterpret_cast<const char*>(W.data()), static_cast<std::streamsize>(W.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(model.biases[l].data()),
             static_cast<std::streamsize>(model.biases[l].size() * sizeof(double)));
  }
  if (!os) throw FormatError("checkpoint write failed");
}

MlpModel read_checkpoint(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a model checkpoint");
  if (get<std::uint32_t>(is) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  MlpModel m;
  const auto n = get<std::uint32_t>(is);
  if (n < 2 || n > 64) throw FormatError("implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) m.layer_sizes.push_back(static_cast<int>(get<std::uint32_t>(is)));
  m.views = static_cast<int>(get<std::uint32_t>(is));
  m.patch_dims.sx = static_cast<int>(get<std::uint32_t>(is));
  m.patch_dims.sy = static_cast<int>(get<std::uint32_t>(is));
  m.patch_dims.sz = static_cast<int>(get<std::uint32_t>(is));
  m.patch_dims.frames = static_cast<int>(get<std::uint32_t>(is));
  for (int a = 0; a < 3; ++a) m.spacing[a] = get<double>(is);
  m.dropout_p = get<double>(is);
  m.input_scale = get<double>(is);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> W(m.layer_sizes[l + 1], m.layer_sizes[l]);
    is.read(reinterpret_cast<char*>(W.data()), static_cast<std::streamsize>(W.size() * sizeof(double)));
    Eigen::VectorXd b(m.layer_sizes[l + 1]);
    is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
    if (!is) throw FormatError("truncated checkpoint payload");
    m.weights.emplace_back(W);
    m.biases.push_back(std::move(b));
  }
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("invalid checkpoint: ") + e.what());
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot create " + path.string());
  write_checkpoint(os, model);
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace cardiostrain
