#include "uqtab/ensemble.hpp"

#include <algorithm>
#include <stdexcept>

namespace uqtab {

EnsembleModel train_ensemble(EnsembleKind kind, int k, const TrainConfig& config,
                             const MlpArchitecture& arch, const Matrix& x_train,
                             const std::vector<int>& y_train, const Matrix& x_val,
                             const std::vector<int>& y_val, RngStream& rng) {
  if (k < 1) throw std::runtime_error("ensemble: need at least one member");
  EnsembleModel model;
  model.kind = kind;
  model.members.reserve(k);

  const int n = x_train.rows();
  for (int member = 0; member < k; ++member) {
    RngStream member_rng = rng.child("ensemble/member", static_cast<std::uint64_t>(member));

    const Matrix* x = &x_train;
    const std::vector<int>* y = &y_train;
    Matrix x_boot;
    std::vector<int> y_boot;
    if (kind == EnsembleKind::bootstrapped) {
      // Uniform resample with replacement, same size as the training set.
      x_boot = Matrix(n, x_train.cols());
      y_boot.resize(n);
      for (int i = 0; i < n; ++i) {
        const int src = static_cast<int>(
            member_rng.uniform_int(static_cast<std::uint64_t>(n)));
        std::copy(x_train.row(src), x_train.row(src) + x_train.cols(),
                  x_boot.row(i));
        y_boot[i] = y_train[src];
      }
      x = &x_boot;
      y = &y_boot;
    }

    if (kind == EnsembleKind::anchored) {
      AnchorSet anchors = draw_anchors(arch, n, member_rng);
      MlpTrainResult r = train_mlp(config, arch, *x, *y, x_val, y_val,
                                   member_rng, &anchors);
      model.members.push_back(std::move(r.params));
      model.anchors.push_back(std::move(anchors));
    } else {
      MlpTrainResult r = train_mlp(config, arch, *x, *y, x_val, y_val, member_rng);
      model.members.push_back(std::move(r.params));
    }
  }
  return model;
}

Matrix ensemble_predictions(const EnsembleModel& model, const Matrix& x) {
  if (model.members.empty()) throw std::runtime_error("ensemble: no members");
  Matrix out(static_cast<int>(model.members.size()), x.rows());
  for (std::size_t member = 0; member < model.members.size(); ++member) {
    const std::vector<double> p = predict_proba(model.members[member], x);
    std::copy(p.begin(), p.end(), out.row(static_cast<int>(member)));
  }
  return out;
}

std::vector<double> ensemble_mean_proba(const EnsembleModel& model, const Matrix& x) {
  const Matrix preds = ensemble_predictions(model, x);
  std::vector<double> mean(x.rows(), 0.0);
  for (int k = 0; k < preds.rows(); ++k) {
    const double* row = preds.row(k);
    for (int i = 0; i < x.rows(); ++i) mean[i] += row[i];
  }
  for (double& m : mean) m /= preds.rows();
  return mean;
}

}  // namespace uqtab
