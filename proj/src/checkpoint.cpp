#include "carl/checkpoint.hpp"

#include "carl/error.hpp"
#include "carl/io_util.hpp"

namespace carl {

using nlohmann::json;

json net_to_json(const DenseNet& net) {
    return {
        {"layer_sizes", net.layer_sizes()},
        {"hidden_activation", "relu"},
        {"output_activation", to_string(net.output_activation())},
        {"params", std::vector<double>(net.params().begin(), net.params().end())},
    };
}

DenseNet net_from_json(const json& j) {
    try {
        DenseNet net(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                     output_activation_from_string(j.at("output_activation").get<std::string>()));
        if (j.value("hidden_activation", "relu") != "relu") throw ConfigError("only relu hidden layers are supported");
        net.set_params(j.at("params").get<std::vector<double>>());
        return net;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed network block: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("malformed network block: ") + e.what());
    }
}

json adam_to_json(const Adam& opt) {
    return {
        {"step_count", opt.step_count()},
        {"learning_rate", opt.config().learning_rate},
        {"beta1", opt.config().beta1},
        {"beta2", opt.config().beta2},
        {"epsilon", opt.config().epsilon},
        {"m", opt.first_moment()},
        {"v", opt.second_moment()},
    };
}

Adam adam_from_json(const json& j) {
    try {
        AdamConfig cfg;
        cfg.learning_rate = j.at("learning_rate").get<double>();
        cfg.beta1 = j.at("beta1").get<double>();
        cfg.beta2 = j.at("beta2").get<double>();
        cfg.epsilon = j.at("epsilon").get<double>();
        auto m = j.at("m").get<std::vector<double>>();
        Adam opt(m.size(), cfg);
        opt.restore(j.at("step_count").get<std::uint64_t>(), std::move(m), j.at("v").get<std::vector<double>>());
        return opt;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed optimizer block: ") + e.what());
    }
}

json checkpoint_to_json(const Checkpoint& ckpt) {
    json subs = json::array();
    for (const auto& p : ckpt.policy.sub_policies()) subs.push_back(net_to_json(p));
    json j = {
        {"format", kCheckpointFormat},
        {"normalization", {{"min", ckpt.normalization.min}, {"max", ckpt.normalization.max}}},
        {"policy",
         {
             {"sub_policy_count", ckpt.policy.size()},
             {"mixing_mode", to_string(ckpt.policy.mixing_mode())},
             {"temperature", ckpt.policy.temperature()},
             {"factorizer", net_to_json(ckpt.policy.factorizer())},
             {"sub_policies", subs},
         }},
    };
    if (ckpt.critics) {
        j["critics"] = {
            {"q1", net_to_json(ckpt.critics->q1)},
            {"q2", net_to_json(ckpt.critics->q2)},
            {"q1_target", net_to_json(ckpt.critics->q1_target)},
            {"q2_target", net_to_json(ckpt.critics->q2_target)},
        };
    }
    if (!ckpt.policy_optimizers.empty()) {
        json opts = json::array();
        for (const auto& o : ckpt.policy_optimizers) opts.push_back(adam_to_json(o));
        j["policy_optimizers"] = opts;
    }
    if (ckpt.trainer_config) j["trainer_config"] = format_trainer_config(*ckpt.trainer_config);
    return j;
}

Checkpoint checkpoint_from_json(const json& j) {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
        throw ConfigError(std::string("not a ") + kCheckpointFormat + " file");
    }
    Checkpoint ckpt;
    try {
        ckpt.normalization.min = j.at("normalization").at("min").get<std::vector<double>>();
        ckpt.normalization.max = j.at("normalization").at("max").get<std::vector<double>>();
        const json& p = j.at("policy");
        std::vector<DenseNet> subs;
        for (const auto& s : p.at("sub_policies")) subs.push_back(net_from_json(s));
        if (subs.size() != p.at("sub_policy_count").get<std::size_t>()) {
            throw ConfigError("sub_policy_count does not match the stored sub-policies");
        }
        ckpt.policy = CascadePolicy(net_from_json(p.at("factorizer")), std::move(subs),
                                    mixing_mode_from_string(p.at("mixing_mode").get<std::string>()),
                                    p.at("temperature").get<double>());
        if (j.contains("critics")) {
            const json& c = j["critics"];
            ckpt.critics = CriticPair{net_from_json(c.at("q1")), net_from_json(c.at("q2")),
                                      net_from_json(c.at("q1_target")), net_from_json(c.at("q2_target"))};
        }
        if (j.contains("policy_optimizers")) {
            for (const auto& o : j["policy_optimizers"]) ckpt.policy_optimizers.push_back(adam_from_json(o));
        }
        if (j.contains("trainer_config")) {
            ckpt.trainer_config = parse_trainer_config(j["trainer_config"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
    if (!ckpt.normalization.complete()) throw ConfigError("checkpoint normalization must cover 8 features");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_atomic(path, checkpoint_to_json(ckpt).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

Checkpoint make_checkpoint(const OfflineTrainer& trainer, const NormalizationStats& normalization) {
    Checkpoint ckpt;
    ckpt.policy = trainer.policy();
    ckpt.normalization = normalization;
    ckpt.critics = trainer.critics();
    ckpt.policy_optimizers.push_back(trainer.factorizer_optimizer());
    for (const auto& o : trainer.sub_policy_optimizers()) ckpt.policy_optimizers.push_back(o);
    ckpt.trainer_config = trainer.config();
    return ckpt;
}

}  // namespace carl
