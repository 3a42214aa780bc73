// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/model.hpp"
#include "dun/training.hpp"

#include <filesystem>
#include <vector>

namespace dun {

enum class EnsembleKind { standard, depth };

std::string to_string(EnsembleKind k);
EnsembleKind parse_ensemble_kind(const std::string& s);

/// Independently trained fixed-depth networks. Each member is a DunModel whose
/// deepest subnetwork is the member network.
struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::standard;
  std::vector<DunModel> members;
  std::vector<std::uint64_t> seeds;
  std::vector<RunRecord> records;

  std::size_t size() const { return members.size(); }
};

struct EnsembleSettings {
  EnsembleKind kind = EnsembleKind::standard;
  std::size_t members = 5;
  /// Depth kind: member m has depth min_depth + m, which must not exceed the
  /// base config's max_depth.
  std::size_t min_depth = 0;
};

/// Member m uses seed + m and is trained with train_vanilla. Standard members
/// share the base config's depth.
EnsembleModel train_ensemble(const EnsembleSettings& ensemble, const ArchitectureConfig& base, const Matrix2D& x,
                             const Matrix2D& y, const OptimizerConfig& opt, TrainSettings settings);

/// Uniform mixture over members' deepest-subnetwork predictions.
Prediction ensemble_predict(const EnsembleModel& ens, const Matrix2D& x);

/// `samples` stochastic passes of the deepest subnetwork with fresh dropout
/// masks (BN in eval mode), combined as a uniform mixture.
Prediction dropout_predict_mc(const DunModel& model, const Matrix2D& x, std::size_t samples, std::uint64_t seed);

/// Directory of member_<i>.ckpt files plus manifest.txt (kind, member count,
/// seeds).
void save_ensemble(const EnsembleModel& ens, const std::filesystem::path& dir);
EnsembleModel load_ensemble(const std::filesystem::path& dir);

}  // namespace dun
