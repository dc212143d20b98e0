#include "dualref/config.hpp"

#include "dualref/errors.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace dualref {

using nlohmann::json;

nn::LrSchedule TrainConfig::adaptation_schedule() const {
    return nn::LrSchedule{lr, 0, 1.0, lr_decay_epochs, lr_decay_factor};
}

nn::LrSchedule TrainConfig::pretrain_schedule() const {
    return nn::LrSchedule{pretrain_lr, pretrain_warmup_epochs, pretrain_warmup_start_factor, pretrain_decay_epochs,
                          pretrain_decay_factor};
}

nn::AdamConfig TrainConfig::adam() const { return nn::AdamConfig{adam_beta1, adam_beta2, 1e-8, weight_decay}; }

bank::BankMode TrainConfig::bank() const { return bank::bank_mode_from_string(bank_mode); }

nn::Activation TrainConfig::act() const { return nn::activation_from_string(activation); }

namespace {

void require(bool ok, const char* key, const std::string& what) {
    if (!ok) {
        throw ConfigError(key, what);
    }
}

void require_increasing(const std::vector<int>& v, const char* key) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        require(v[i] >= 0, key, "epochs must be >= 0");
        require(i == 0 || v[i] > v[i - 1], key, "epochs must be strictly increasing");
    }
}

// One accessor pair per field keeps the JSON mapping in a single table.
template <typename T>
void bind(std::map<std::string, std::function<void(const json&)>>& readers, json& out, const char* key, T& field) {
    out[key] = field;
    readers[key] = [&field, key](const json& v) {
        try {
            field = v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(key, "wrong type: " + v.dump());
        }
    };
}

template <typename Cfg, typename F>
void bind_all(Cfg& c, F&& b) {
    b("alpha", c.alpha);
    b("mu", c.mu);
    b("triplet_margin", c.triplet_margin);
    b("spread_margin", c.spread_margin);
    b("k_pos", c.k_pos);
    b("fine_clusters", c.fine_clusters);
    b("k_rr", c.k_rr);
    b("reciprocal_expansion", c.reciprocal_expansion);
    b("eps_percentile", c.eps_percentile);
    b("min_pts", c.min_pts);
    b("kmeans_max_iter", c.kmeans_max_iter);
    b("batch_p", c.batch_p);
    b("batch_k", c.batch_k);
    b("epochs", c.epochs);
    b("iters_per_epoch", c.iters_per_epoch);
    b("lr", c.lr);
    b("lr_decay_epochs", c.lr_decay_epochs);
    b("lr_decay_factor", c.lr_decay_factor);
    b("pretrain_epochs", c.pretrain_epochs);
    b("pretrain_iters_per_epoch", c.pretrain_iters_per_epoch);
    b("pretrain_lr", c.pretrain_lr);
    b("pretrain_warmup_epochs", c.pretrain_warmup_epochs);
    b("pretrain_warmup_start_factor", c.pretrain_warmup_start_factor);
    b("pretrain_decay_epochs", c.pretrain_decay_epochs);
    b("pretrain_decay_factor", c.pretrain_decay_factor);
    b("weight_decay", c.weight_decay);
    b("adam_beta1", c.adam_beta1);
    b("adam_beta2", c.adam_beta2);
    b("feature_dim", c.feature_dim);
    b("hidden_dim", c.hidden_dim);
    b("activation", c.activation);
    b("classifier_init_std", c.classifier_init_std);
    b("bank_mode", c.bank_mode);
    b("bank_momentum", c.bank_momentum);
    b("seed", c.seed);
}

}  // namespace

void TrainConfig::validate() const {
    require(alpha >= 0.0 && alpha <= 1.0, "alpha", "must lie in [0, 1]");
    require(mu >= 0.0, "mu", "must be >= 0");
    require(triplet_margin >= 0.0, "triplet_margin", "must be >= 0");
    require(spread_margin >= 0.0, "spread_margin", "must be >= 0");
    require(k_pos >= 0, "k_pos", "must be >= 0");
    require(fine_clusters >= 1, "fine_clusters", "must be >= 1");
    require(k_rr >= 1, "k_rr", "must be >= 1");
    require(eps_percentile > 0.0 && eps_percentile < 100.0, "eps_percentile", "must lie in (0, 100)");
    require(min_pts >= 1, "min_pts", "must be >= 1");
    require(kmeans_max_iter >= 1, "kmeans_max_iter", "must be >= 1");
    require(batch_p >= 1, "batch_p", "must be >= 1");
    require(batch_k >= 1, "batch_k", "must be >= 1");
    require(epochs >= 0, "epochs", "must be >= 0");
    require(iters_per_epoch >= 0, "iters_per_epoch", "must be >= 0");
    require(lr >= 0.0, "lr", "must be >= 0");
    require_increasing(lr_decay_epochs, "lr_decay_epochs");
    require(lr_decay_factor > 0.0, "lr_decay_factor", "must be > 0");
    require(pretrain_epochs >= 0, "pretrain_epochs", "must be >= 0");
    require(pretrain_iters_per_epoch >= 0, "pretrain_iters_per_epoch", "must be >= 0");
    require(pretrain_lr >= 0.0, "pretrain_lr", "must be >= 0");
    require(pretrain_warmup_epochs >= 0, "pretrain_warmup_epochs", "must be >= 0");
    require(pretrain_warmup_start_factor >= 0.0 && pretrain_warmup_start_factor <= 1.0, "pretrain_warmup_start_factor",
            "must lie in [0, 1]");
    require_increasing(pretrain_decay_epochs, "pretrain_decay_epochs");
    require(pretrain_decay_factor > 0.0, "pretrain_decay_factor", "must be > 0");
    require(weight_decay >= 0.0, "weight_decay", "must be >= 0");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
    require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
    require(feature_dim >= 1, "feature_dim", "must be >= 1");
    require(hidden_dim >= 0, "hidden_dim", "must be >= 0");
    require(activation == "tanh" || activation == "linear", "activation", "must be 'tanh' or 'linear'");
    require(classifier_init_std >= 0.0, "classifier_init_std", "must be >= 0");
    require(bank_mode == "instant" || bank_mode == "momentum", "bank_mode", "must be 'instant' or 'momentum'");
    require(bank_momentum >= 0.0 && bank_momentum < 1.0, "bank_momentum", "must lie in [0, 1)");
}

json to_json(const TrainConfig& cfg) {
    TrainConfig copy = cfg;
    json out = json::object();
    std::map<std::string, std::function<void(const json&)>> unused;
    bind_all(copy, [&](const char* key, auto& field) { bind(unused, out, key, field); });
    return out;
}

TrainConfig config_from_json(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("<root>", "config must be a JSON object");
    }
    TrainConfig cfg;
    json defaults = json::object();
    std::map<std::string, std::function<void(const json&)>> readers;
    bind_all(cfg, [&](const char* key, auto& field) { bind(readers, defaults, key, field); });
    for (const auto& [key, value] : j.items()) {
        const auto it = readers.find(key);
        if (it == readers.end()) {
            throw ConfigError(key, "unknown config key");
        }
        it->second(value);
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError(IoErrorKind::Open, "cannot read config " + path);
    }
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw IoError(IoErrorKind::ParseError, path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace dualref
