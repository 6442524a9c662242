#include "uqtab/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "uqtab/kernels.hpp"
#include "uqtab/numerics.hpp"
#include "uqtab/temperature.hpp"

namespace uqtab {

using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kSingleMetrics = {"max_prob", "entropy"};
const std::vector<std::string> kMultiMetrics = {"std", "entropy",
                                                "mutual_information"};
const std::vector<std::string> kDensityMetrics = {"novelty"};

// Best configurations found for the reference cohort; ensembles and the
// temperature-scaled variant reuse the plain network settings.
Hyperparams nn_defaults() {
  Hyperparams hp;
  hp.hidden_sizes = {30};
  hp.dropout_rate = 0.157483;
  hp.learning_rate = 0.000538;
  return hp;
}

Hyperparams mc_dropout_defaults() {
  Hyperparams hp;
  hp.hidden_sizes = {50};
  hp.dropout_rate = 0.333312;
  hp.learning_rate = 0.000526;
  return hp;
}

Hyperparams bbb_defaults() {
  Hyperparams hp;
  hp.hidden_sizes = {25, 25, 25};
  hp.dropout_rate = 0.177533;
  hp.learning_rate = 0.002418;
  hp.mu_init = 0.22187;
  hp.rho_init = -5.982621;
  hp.prior_pi = 0.233419;
  hp.prior_sigma1 = 0.740818;
  hp.prior_sigma2 = 0.606531;
  return hp;
}

Hyperparams logreg_defaults() {
  Hyperparams hp;
  hp.inverse_l2 = 10.0;
  return hp;
}

Hyperparams ppca_defaults() {
  Hyperparams hp;
  hp.n_components = 15;
  return hp;
}

Hyperparams ae_defaults() {
  Hyperparams hp;
  hp.hidden_sizes = {75};
  hp.latent_dim = 15;
  hp.learning_rate = 0.006897;
  return hp;
}

std::vector<ModelSpec> build_registry() {
  std::vector<ModelSpec> specs;
  specs.push_back({"AnchoredNNEnsemble", nn_defaults(), kMultiMetrics, true});
  specs.push_back({"BBB", bbb_defaults(), kMultiMetrics, true});
  specs.push_back(
      {"BootstrappedNNEnsemble", nn_defaults(), kMultiMetrics, true});
  specs.push_back({"LogReg", logreg_defaults(), kSingleMetrics, true});
  specs.push_back({"MCDropout", mc_dropout_defaults(), kMultiMetrics, true});
  specs.push_back({"NNEnsemble", nn_defaults(), kMultiMetrics, true});
  specs.push_back({"NN", nn_defaults(), kSingleMetrics, true});
  specs.push_back({"PlattScalingNN", nn_defaults(), kSingleMetrics, true});
  specs.push_back({"PPCA", ppca_defaults(), kDensityMetrics, false});
  specs.push_back({"AE", ae_defaults(), kDensityMetrics, false});
  return specs;
}

TrainConfig train_config_from(const Hyperparams& hp) {
  TrainConfig config;
  config.learning_rate = hp.learning_rate;
  config.max_epochs = hp.max_epochs;
  config.patience = hp.patience;
  config.batch_size = hp.batch_size;
  return config;
}

MlpArchitecture arch_from(const Hyperparams& hp, int input_dim) {
  MlpArchitecture arch;
  arch.input_dim = input_dim;
  arch.hidden_sizes = hp.hidden_sizes;
  arch.dropout_rate = hp.dropout_rate;
  return arch;
}

PredictionEnsemble single_row_ensemble(std::vector<double> probs) {
  PredictionEnsemble ens(1, static_cast<int>(probs.size()));
  std::copy(probs.begin(), probs.end(), ens.row(0));
  return ens;
}

}  // namespace

nlohmann::ordered_json hyperparams_to_json(const Hyperparams& hp) {
  return ordered_json{{"hidden_sizes", hp.hidden_sizes},
                      {"dropout_rate", hp.dropout_rate},
                      {"learning_rate", hp.learning_rate},
                      {"mu_init", hp.mu_init},
                      {"rho_init", hp.rho_init},
                      {"prior_pi", hp.prior_pi},
                      {"prior_sigma1", hp.prior_sigma1},
                      {"prior_sigma2", hp.prior_sigma2},
                      {"inverse_l2", hp.inverse_l2},
                      {"latent_dim", hp.latent_dim},
                      {"n_components", hp.n_components},
                      {"n_samples", hp.n_samples},
                      {"max_epochs", hp.max_epochs},
                      {"patience", hp.patience},
                      {"batch_size", hp.batch_size}};
}

Hyperparams hyperparams_from_json(const nlohmann::ordered_json& j) {
  Hyperparams hp;
  hp.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
  hp.dropout_rate = j.at("dropout_rate").get<double>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.mu_init = j.at("mu_init").get<double>();
  hp.rho_init = j.at("rho_init").get<double>();
  hp.prior_pi = j.at("prior_pi").get<double>();
  hp.prior_sigma1 = j.at("prior_sigma1").get<double>();
  hp.prior_sigma2 = j.at("prior_sigma2").get<double>();
  hp.inverse_l2 = j.at("inverse_l2").get<double>();
  hp.latent_dim = j.at("latent_dim").get<int>();
  hp.n_components = j.at("n_components").get<int>();
  hp.n_samples = j.at("n_samples").get<int>();
  hp.max_epochs = j.at("max_epochs").get<int>();
  hp.patience = j.at("patience").get<int>();
  hp.batch_size = j.at("batch_size").get<int>();
  return hp;
}

const std::vector<ModelSpec>& model_registry() {
  static const std::vector<ModelSpec> registry = build_registry();
  return registry;
}

const ModelSpec& find_model_spec(const std::string& name) {
  for (const ModelSpec& spec : model_registry()) {
    if (spec.name == name) return spec;
  }
  throw std::invalid_argument("unknown model name: " + name);
}

TrainedModel train_model(const ModelSpec& spec, const Hyperparams& hp,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_val, const std::vector<int>& y_val,
                         RngStream& rng) {
  const int input_dim = x_train.cols();
  const TrainConfig config = train_config_from(hp);

  if (spec.name == "NN") {
    MlpTrainResult result = train_mlp(config, arch_from(hp, input_dim), x_train,
                                      y_train, x_val, y_val, rng);
    return {spec.name, NnModel{std::move(result.params)}};
  }
  if (spec.name == "PlattScalingNN") {
    MlpTrainResult result = train_mlp(config, arch_from(hp, input_dim), x_train,
                                      y_train, x_val, y_val, rng);
    const std::vector<double> logits = mlp_logits(result.params, x_val);
    const double t = fit_temperature(logits, y_val);
    return {spec.name, PlattScalingModel{std::move(result.params), t}};
  }
  if (spec.name == "MCDropout") {
    MlpTrainResult result = train_mlp(config, arch_from(hp, input_dim), x_train,
                                      y_train, x_val, y_val, rng);
    return {spec.name, McDropoutModel{std::move(result.params)}};
  }
  if (spec.name == "BBB") {
    const BbbPrior prior{hp.prior_pi, hp.prior_sigma1, hp.prior_sigma2};
    BbbTrainResult result =
        train_bbb(config, arch_from(hp, input_dim), prior, hp.mu_init,
                  hp.rho_init, x_train, y_train, x_val, y_val, rng);
    return {spec.name, BbbModel{std::move(result.params)}};
  }
  if (spec.name == "LogReg") {
    return {spec.name, train_logreg(x_train, y_train, hp.inverse_l2)};
  }
  if (spec.name == "NNEnsemble" || spec.name == "BootstrappedNNEnsemble" ||
      spec.name == "AnchoredNNEnsemble") {
    EnsembleKind kind = EnsembleKind::plain;
    if (spec.name == "BootstrappedNNEnsemble") kind = EnsembleKind::bootstrapped;
    if (spec.name == "AnchoredNNEnsemble") kind = EnsembleKind::anchored;
    EnsembleModel ensemble =
        train_ensemble(kind, hp.n_samples, config, arch_from(hp, input_dim),
                       x_train, y_train, x_val, y_val, rng);
    return {spec.name, std::move(ensemble)};
  }
  if (spec.name == "PPCA") {
    return {spec.name, fit_ppca(x_train, hp.n_components)};
  }
  if (spec.name == "AE") {
    AeTrainResult result = train_autoencoder(
        config, input_dim, hp.hidden_sizes, hp.latent_dim, x_train, x_val, rng);
    return {spec.name, std::move(result.model)};
  }
  throw std::invalid_argument("unknown model name: " + spec.name);
}

std::vector<double> predict_mean_proba(const TrainedModel& model,
                                       const Matrix& x) {
  if (const auto* nn = std::get_if<NnModel>(&model.model)) {
    return predict_proba(nn->net, x);
  }
  if (const auto* platt = std::get_if<PlattScalingModel>(&model.model)) {
    std::vector<double> probs = mlp_logits(platt->net, x);
    for (double& v : probs) v = sigmoid(v / platt->temperature);
    return probs;
  }
  if (const auto* lr = std::get_if<LogRegModel>(&model.model)) {
    return logreg_predict_proba(*lr, x);
  }
  if (const auto* mc = std::get_if<McDropoutModel>(&model.model)) {
    return predict_proba(mc->net, x);
  }
  if (const auto* bbb = std::get_if<BbbModel>(&model.model)) {
    return predict_proba(bbb_mean_weights(bbb->params), x);
  }
  if (const auto* ens = std::get_if<EnsembleModel>(&model.model)) {
    return ensemble_mean_proba(*ens, x);
  }
  throw std::invalid_argument("model " + model.name +
                              " does not produce class probabilities");
}

PredictionEnsemble sample_predictions(const TrainedModel& model,
                                      const Matrix& x, int k, RngStream& rng) {
  if (k < 1) throw std::invalid_argument("sample count must be positive");
  if (std::holds_alternative<NnModel>(model.model) ||
      std::holds_alternative<PlattScalingModel>(model.model) ||
      std::holds_alternative<LogRegModel>(model.model)) {
    return single_row_ensemble(predict_mean_proba(model, x));
  }
  if (const auto* mc = std::get_if<McDropoutModel>(&model.model)) {
    return mc_dropout_predictions(mc->net, x, k, rng);
  }
  if (const auto* bbb = std::get_if<BbbModel>(&model.model)) {
    return bbb_sample_predictions(bbb->params, x, k, rng);
  }
  if (const auto* ens = std::get_if<EnsembleModel>(&model.model)) {
    if (k != static_cast<int>(ens->members.size())) {
      throw std::invalid_argument(
          "ensemble sample count must equal the member count");
    }
    return ensemble_predictions(*ens, x);
  }
  throw std::invalid_argument("model " + model.name +
                              " does not produce class probabilities");
}

std::vector<UncertaintyScores> compute_model_scores(const TrainedModel& model,
                                                    const Matrix& x, int k,
                                                    RngStream& rng) {
  if (const auto* ppca = std::get_if<PpcaModel>(&model.model)) {
    std::vector<double> lls = ppca_log_likelihood_rows(*ppca, x);
    for (double& v : lls) v = -v;
    return {UncertaintyScores{"novelty", std::move(lls)}};
  }
  if (const auto* ae = std::get_if<AutoencoderModel>(&model.model)) {
    return {UncertaintyScores{"novelty", reconstruction_errors(*ae, x)}};
  }

  int k_eff = k;
  if (const auto* ens = std::get_if<EnsembleModel>(&model.model)) {
    k_eff = static_cast<int>(ens->members.size());
  }
  const PredictionEnsemble ens = sample_predictions(model, x, k_eff, rng);
  std::vector<UncertaintyScores> scores;
  for (const std::string& metric : find_model_spec(model.name).metrics) {
    if (metric == "max_prob") {
      scores.push_back(max_prob_uncertainty(predict_mean_proba(model, x)));
    } else if (metric == "std") {
      scores.push_back(class1_std(ens));
    } else if (metric == "entropy") {
      scores.push_back(predictive_entropy(ens));
    } else if (metric == "mutual_information") {
      scores.push_back(mutual_information(ens));
    } else {
      throw std::logic_error("unhandled metric: " + metric);
    }
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'U', 'Q', 'T', 'A', 'B', 'M', '0', '1'};

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void append_f64_le(std::string& out, double v) {
  append_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return v;
}

// One named tensor scheduled for the binary section.
struct Block {
  std::string name;
  int rows = 0;
  int cols = 0;
  const double* data = nullptr;
};

void add_block(std::vector<Block>& blocks, std::string name, const Matrix& m) {
  blocks.push_back({std::move(name), m.rows(), m.cols(), m.data()});
}

void add_block(std::vector<Block>& blocks, std::string name,
               const std::vector<double>& v) {
  blocks.push_back(
      {std::move(name), 1, static_cast<int>(v.size()), v.data()});
}

void add_block(std::vector<Block>& blocks, std::string name, const double& v) {
  blocks.push_back({std::move(name), 1, 1, &v});
}

ordered_json arch_json(const MlpArchitecture& arch) {
  return ordered_json{{"input_dim", arch.input_dim},
                      {"hidden_sizes", arch.hidden_sizes},
                      {"dropout_rate", arch.dropout_rate}};
}

MlpArchitecture arch_from_json(const ordered_json& j) {
  MlpArchitecture arch;
  arch.input_dim = j.at("input_dim").get<int>();
  arch.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
  arch.dropout_rate = j.at("dropout_rate").get<double>();
  return arch;
}

void add_net_blocks(std::vector<Block>& blocks, const std::string& prefix,
                    const MlpParams& net) {
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    add_block(blocks, prefix + "w" + std::to_string(i), net.weights[i]);
    add_block(blocks, prefix + "b" + std::to_string(i), net.biases[i]);
  }
}

const char* ensemble_kind_name(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::plain:
      return "plain";
    case EnsembleKind::bootstrapped:
      return "bootstrapped";
    case EnsembleKind::anchored:
      return "anchored";
  }
  throw std::logic_error("unhandled ensemble kind");
}

EnsembleKind ensemble_kind_from(const std::string& name) {
  if (name == "plain") return EnsembleKind::plain;
  if (name == "bootstrapped") return EnsembleKind::bootstrapped;
  if (name == "anchored") return EnsembleKind::anchored;
  throw std::runtime_error("unknown ensemble kind: " + name);
}

}  // namespace

void save_model(const TrainedModel& model, const Hyperparams& hp,
                const ScalerStats* scaler, std::uint64_t master_seed,
                const std::string& path) {
  ordered_json header;
  header["format"] = "uqtab-model";
  header["version"] = 1;
  header["name"] = model.name;
  header["master_seed"] = master_seed;
  header["hyperparams"] = hyperparams_to_json(hp);

  std::vector<Block> blocks;
  if (scaler != nullptr) {
    header["scaler"] = ordered_json{
        {"present", true}, {"dim", static_cast<int>(scaler->mean.size())}};
    add_block(blocks, "scaler.mean", scaler->mean);
    add_block(blocks, "scaler.std", scaler->stdev);
    add_block(blocks, "scaler.impute", scaler->impute_mean);
  } else {
    header["scaler"] = ordered_json{{"present", false}, {"dim", 0}};
  }

  ordered_json arch;
  if (const auto* nn = std::get_if<NnModel>(&model.model)) {
    header["variant"] = "nn";
    arch = arch_json(nn->net.arch);
    add_net_blocks(blocks, "", nn->net);
  } else if (const auto* platt = std::get_if<PlattScalingModel>(&model.model)) {
    header["variant"] = "platt";
    arch = arch_json(platt->net.arch);
    add_net_blocks(blocks, "", platt->net);
    add_block(blocks, "temperature", platt->temperature);
  } else if (const auto* lr = std::get_if<LogRegModel>(&model.model)) {
    header["variant"] = "logreg";
    arch = ordered_json{{"input_dim", static_cast<int>(lr->weights.size())},
                        {"inverse_l2", lr->inverse_l2},
                        {"converged", lr->converged}};
    add_block(blocks, "w", lr->weights);
    add_block(blocks, "b", lr->bias);
  } else if (const auto* mc = std::get_if<McDropoutModel>(&model.model)) {
    header["variant"] = "mc_dropout";
    arch = arch_json(mc->net.arch);
    add_net_blocks(blocks, "", mc->net);
  } else if (const auto* bbb = std::get_if<BbbModel>(&model.model)) {
    header["variant"] = "bbb";
    arch = arch_json(bbb->params.arch);
    arch["prior_pi"] = bbb->params.prior.pi;
    arch["prior_sigma1"] = bbb->params.prior.sigma1;
    arch["prior_sigma2"] = bbb->params.prior.sigma2;
    for (std::size_t i = 0; i < bbb->params.mu_w.size(); ++i) {
      const std::string n = std::to_string(i);
      add_block(blocks, "mu_w" + n, bbb->params.mu_w[i]);
      add_block(blocks, "rho_w" + n, bbb->params.rho_w[i]);
      add_block(blocks, "mu_b" + n, bbb->params.mu_b[i]);
      add_block(blocks, "rho_b" + n, bbb->params.rho_b[i]);
    }
  } else if (const auto* ens = std::get_if<EnsembleModel>(&model.model)) {
    header["variant"] = "ensemble";
    arch = arch_json(ens->members.at(0).arch);
    arch["kind"] = ensemble_kind_name(ens->kind);
    arch["n_members"] = static_cast<int>(ens->members.size());
    if (ens->kind == EnsembleKind::anchored) {
      arch["anchor_n_train"] = ens->anchors.at(0).n_train;
    }
    for (std::size_t m = 0; m < ens->members.size(); ++m) {
      add_net_blocks(blocks, "m" + std::to_string(m) + ".", ens->members[m]);
    }
    if (ens->kind == EnsembleKind::anchored) {
      for (std::size_t m = 0; m < ens->anchors.size(); ++m) {
        const AnchorSet& anchor = ens->anchors[m];
        const std::string prefix = "m" + std::to_string(m) + ".anchor.";
        for (std::size_t i = 0; i < anchor.weights.size(); ++i) {
          add_block(blocks, prefix + "w" + std::to_string(i),
                    anchor.weights[i]);
          add_block(blocks, prefix + "b" + std::to_string(i),
                    anchor.biases[i]);
        }
      }
      add_block(blocks, "anchor.weight_lambda",
                ens->anchors.at(0).weight_lambda);
      add_block(blocks, "anchor.bias_lambda", ens->anchors.at(0).bias_lambda);
    }
  } else if (const auto* ppca = std::get_if<PpcaModel>(&model.model)) {
    header["variant"] = "ppca";
    arch = ordered_json{{"input_dim", static_cast<int>(ppca->mean.size())},
                        {"n_components", ppca->w.cols()},
                        {"sigma2_floored", ppca->sigma2_floored}};
    add_block(blocks, "mean", ppca->mean);
    add_block(blocks, "w", ppca->w);
    add_block(blocks, "sigma2", ppca->sigma2);
  } else if (const auto* ae = std::get_if<AutoencoderModel>(&model.model)) {
    header["variant"] = "autoencoder";
    arch = ordered_json{{"input_dim", ae->input_dim},
                        {"hidden_sizes", ae->hidden_sizes},
                        {"latent_dim", ae->latent_dim}};
    for (std::size_t i = 0; i < ae->weights.size(); ++i) {
      add_block(blocks, "w" + std::to_string(i), ae->weights[i]);
      add_block(blocks, "b" + std::to_string(i), ae->biases[i]);
    }
  } else {
    throw std::logic_error("unhandled model variant");
  }
  header["architecture"] = arch;

  ordered_json block_list = ordered_json::array();
  for (const Block& b : blocks) {
    block_list.push_back(
        ordered_json{{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  }
  header["blocks"] = block_list;

  std::string payload;
  payload.append(kMagic, sizeof(kMagic));
  const std::string header_bytes = header.dump();
  append_u64_le(payload, header_bytes.size());
  payload.append(header_bytes);
  for (const Block& b : blocks) {
    const std::size_t count =
        static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
    for (std::size_t i = 0; i < count; ++i) append_f64_le(payload, b.data[i]);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

namespace {

// Sequential reader over the binary block section.
class BlockReader {
 public:
  BlockReader(const ordered_json& block_list, const unsigned char* data,
              std::size_t size)
      : block_list_(block_list), data_(data), size_(size) {}

  // Reads the next declared block, checking its name and shape.
  void read(const std::string& name, int rows, int cols, double* out) {
    if (index_ >= block_list_.size()) {
      throw std::runtime_error("model file ended before block " + name);
    }
    const ordered_json& decl = block_list_.at(index_++);
    if (decl.at("name").get<std::string>() != name ||
        decl.at("rows").get<int>() != rows ||
        decl.at("cols").get<int>() != cols) {
      throw std::runtime_error("model file block mismatch at " + name);
    }
    const std::size_t count =
        static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (offset_ + count * 8 > size_) {
      throw std::runtime_error("model file truncated at block " + name);
    }
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = std::bit_cast<double>(read_u64_le(data_ + offset_));
      offset_ += 8;
    }
  }

  void read(const std::string& name, Matrix& m) {
    read(name, m.rows(), m.cols(), m.data());
  }

  void read(const std::string& name, std::vector<double>& v) {
    read(name, 1, static_cast<int>(v.size()), v.data());
  }

  void read(const std::string& name, double& v) { read(name, 1, 1, &v); }

  void finish() const {
    if (index_ != block_list_.size() || offset_ != size_) {
      throw std::runtime_error("model file has trailing data");
    }
  }

 private:
  const ordered_json& block_list_;
  const unsigned char* data_;
  std::size_t size_ = 0;
  std::size_t offset_ = 0;
  std::size_t index_ = 0;
};

MlpParams read_net(BlockReader& reader, const std::string& prefix,
                   const MlpArchitecture& arch) {
  MlpParams net;
  net.arch = arch;
  std::vector<int> dims;
  dims.push_back(arch.input_dim);
  for (int h : arch.hidden_sizes) dims.push_back(h);
  dims.push_back(1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Matrix w(dims[i], dims[i + 1]);
    std::vector<double> b(static_cast<std::size_t>(dims[i + 1]), 0.0);
    reader.read(prefix + "w" + std::to_string(i), w);
    reader.read(prefix + "b" + std::to_string(i), b);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

}  // namespace

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + " is not a model file");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t header_len = read_u64_le(raw + sizeof(kMagic));
  const std::size_t header_start = sizeof(kMagic) + 8;
  if (header_start + header_len > bytes.size()) {
    throw std::runtime_error(path + " has a truncated header");
  }
  const ordered_json header = ordered_json::parse(
      bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
      bytes.begin() + static_cast<std::ptrdiff_t>(header_start + header_len));
  if (header.at("format").get<std::string>() != "uqtab-model" ||
      header.at("version").get<int>() != 1) {
    throw std::runtime_error(path + " has an unsupported format version");
  }

  LoadedModel loaded;
  loaded.model.name = header.at("name").get<std::string>();
  loaded.master_seed = header.at("master_seed").get<std::uint64_t>();
  loaded.hyperparams = hyperparams_from_json(header.at("hyperparams"));

  BlockReader reader(header.at("blocks"),
                     raw + header_start + header_len,
                     bytes.size() - header_start - header_len);

  const ordered_json& scaler_info = header.at("scaler");
  if (scaler_info.at("present").get<bool>()) {
    const int dim = scaler_info.at("dim").get<int>();
    loaded.scaler.mean.resize(static_cast<std::size_t>(dim));
    loaded.scaler.stdev.resize(static_cast<std::size_t>(dim));
    loaded.scaler.impute_mean.resize(static_cast<std::size_t>(dim));
    reader.read("scaler.mean", loaded.scaler.mean);
    reader.read("scaler.std", loaded.scaler.stdev);
    reader.read("scaler.impute", loaded.scaler.impute_mean);
    loaded.has_scaler = true;
  }

  const std::string variant = header.at("variant").get<std::string>();
  const ordered_json& arch = header.at("architecture");
  if (variant == "nn") {
    loaded.model.model = NnModel{read_net(reader, "", arch_from_json(arch))};
  } else if (variant == "platt") {
    PlattScalingModel platt{read_net(reader, "", arch_from_json(arch)), 1.0};
    reader.read("temperature", platt.temperature);
    loaded.model.model = std::move(platt);
  } else if (variant == "logreg") {
    LogRegModel lr;
    lr.inverse_l2 = arch.at("inverse_l2").get<double>();
    lr.converged = arch.at("converged").get<bool>();
    lr.weights.resize(arch.at("input_dim").get<std::size_t>());
    reader.read("w", lr.weights);
    reader.read("b", lr.bias);
    loaded.model.model = std::move(lr);
  } else if (variant == "mc_dropout") {
    loaded.model.model =
        McDropoutModel{read_net(reader, "", arch_from_json(arch))};
  } else if (variant == "bbb") {
    BbbParams params;
    params.arch = arch_from_json(arch);
    params.prior = BbbPrior{arch.at("prior_pi").get<double>(),
                            arch.at("prior_sigma1").get<double>(),
                            arch.at("prior_sigma2").get<double>()};
    std::vector<int> dims;
    dims.push_back(params.arch.input_dim);
    for (int h : params.arch.hidden_sizes) dims.push_back(h);
    dims.push_back(1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      const std::string n = std::to_string(i);
      Matrix mu_w(dims[i], dims[i + 1]);
      Matrix rho_w(dims[i], dims[i + 1]);
      std::vector<double> mu_b(static_cast<std::size_t>(dims[i + 1]), 0.0);
      std::vector<double> rho_b(static_cast<std::size_t>(dims[i + 1]), 0.0);
      reader.read("mu_w" + n, mu_w);
      reader.read("rho_w" + n, rho_w);
      reader.read("mu_b" + n, mu_b);
      reader.read("rho_b" + n, rho_b);
      params.mu_w.push_back(std::move(mu_w));
      params.rho_w.push_back(std::move(rho_w));
      params.mu_b.push_back(std::move(mu_b));
      params.rho_b.push_back(std::move(rho_b));
    }
    loaded.model.model = BbbModel{std::move(params)};
  } else if (variant == "ensemble") {
    EnsembleModel ens;
    ens.kind = ensemble_kind_from(arch.at("kind").get<std::string>());
    const int n_members = arch.at("n_members").get<int>();
    const MlpArchitecture member_arch = arch_from_json(arch);
    for (int m = 0; m < n_members; ++m) {
      ens.members.push_back(
          read_net(reader, "m" + std::to_string(m) + ".", member_arch));
    }
    if (ens.kind == EnsembleKind::anchored) {
      const int n_train = arch.at("anchor_n_train").get<int>();
      for (int m = 0; m < n_members; ++m) {
        AnchorSet anchor;
        anchor.n_train = n_train;
        const std::string prefix = "m" + std::to_string(m) + ".anchor.";
        const MlpParams& net = ens.members[static_cast<std::size_t>(m)];
        for (std::size_t i = 0; i < net.weights.size(); ++i) {
          Matrix w(net.weights[i].rows(), net.weights[i].cols());
          std::vector<double> b(net.biases[i].size(), 0.0);
          reader.read(prefix + "w" + std::to_string(i), w);
          reader.read(prefix + "b" + std::to_string(i), b);
          anchor.weights.push_back(std::move(w));
          anchor.biases.push_back(std::move(b));
        }
        anchor.weight_lambda.resize(net.weights.size(), 0.0);
        ens.anchors.push_back(std::move(anchor));
      }
      std::vector<double> weight_lambda(ens.members[0].weights.size(), 0.0);
      double bias_lambda = 0.0;
      reader.read("anchor.weight_lambda", weight_lambda);
      reader.read("anchor.bias_lambda", bias_lambda);
      for (AnchorSet& anchor : ens.anchors) {
        anchor.weight_lambda = weight_lambda;
        anchor.bias_lambda = bias_lambda;
      }
    }
    loaded.model.model = std::move(ens);
  } else if (variant == "ppca") {
    PpcaModel ppca;
    const int dim = arch.at("input_dim").get<int>();
    const int q = arch.at("n_components").get<int>();
    ppca.sigma2_floored = arch.at("sigma2_floored").get<bool>();
    ppca.mean.resize(static_cast<std::size_t>(dim));
    ppca.w = Matrix(dim, q);
    reader.read("mean", ppca.mean);
    reader.read("w", ppca.w);
    reader.read("sigma2", ppca.sigma2);
    ppca_refresh_cache(&ppca);
    loaded.model.model = std::move(ppca);
  } else if (variant == "autoencoder") {
    AutoencoderModel ae;
    ae.input_dim = arch.at("input_dim").get<int>();
    ae.hidden_sizes = arch.at("hidden_sizes").get<std::vector<int>>();
    ae.latent_dim = arch.at("latent_dim").get<int>();
    std::vector<int> dims;
    dims.push_back(ae.input_dim);
    for (int h : ae.hidden_sizes) dims.push_back(h);
    dims.push_back(ae.latent_dim);
    for (std::size_t i = ae.hidden_sizes.size(); i-- > 0;) {
      dims.push_back(ae.hidden_sizes[i]);
    }
    dims.push_back(ae.input_dim);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      Matrix w(dims[i], dims[i + 1]);
      std::vector<double> b(static_cast<std::size_t>(dims[i + 1]), 0.0);
      reader.read("w" + std::to_string(i), w);
      reader.read("b" + std::to_string(i), b);
      ae.weights.push_back(std::move(w));
      ae.biases.push_back(std::move(b));
    }
    loaded.model.model = std::move(ae);
  } else {
    throw std::runtime_error("unknown model variant: " + variant);
  }
  reader.finish();
  return loaded;
}

}  // namespace uqtab
