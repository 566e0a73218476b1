#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carl/cascade_policy.hpp"
#include "carl/mdp.hpp"
#include "carl/net.hpp"
#include "carl/trainer.hpp"

namespace carl {

inline constexpr const char* kCheckpointFormat = "carl-checkpoint-v1";

/// Everything needed to deploy or resume a cascade policy.
struct Checkpoint {
    CascadePolicy policy;
    NormalizationStats normalization;
    std::optional<CriticPair> critics;
    /// Adam state for the factorizer followed by one entry per sub-policy.
    std::vector<Adam> policy_optimizers;
    std::optional<TrainerConfig> trainer_config;
};

nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);
nlohmann::json adam_to_json(const Adam& opt);
Adam adam_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Atomic write (temp file then rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Bundles the trainer's final state.
Checkpoint make_checkpoint(const OfflineTrainer& trainer, const NormalizationStats& normalization);

}  // namespace carl
