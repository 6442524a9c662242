#pragma once

#include <vector>

#include "uqtab/matrix.hpp"
#include "uqtab/mlp.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {

enum class EnsembleKind { plain, bootstrapped, anchored };

struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::plain;
  std::vector<MlpParams> members;
  // Anchored only: each member keeps the anchors it was regularized toward.
  std::vector<AnchorSet> anchors;
};

// Trains K members with per-member RNG streams:
//   plain        — independent initializations on the shared training set;
//   bootstrapped — each member trains on a uniform-with-replacement resample
//                  of the full training-set size;
//   anchored     — plain training plus the anchored penalty in the loss.
EnsembleModel train_ensemble(EnsembleKind kind, int k, const TrainConfig& config,
                             const MlpArchitecture& arch, const Matrix& x_train,
                             const std::vector<int>& y_train, const Matrix& x_val,
                             const std::vector<int>& y_val, RngStream& rng);

// One row of positive-class probabilities per member.
Matrix ensemble_predictions(const EnsembleModel& model, const Matrix& x);

// Mean over members, as the point prediction.
std::vector<double> ensemble_mean_proba(const EnsembleModel& model, const Matrix& x);

}  // namespace uqtab
