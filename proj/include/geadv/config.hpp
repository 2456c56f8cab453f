#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geadv/attacks.hpp"
#include "geadv/gan.hpp"
#include "geadv/io.hpp"
#include "geadv/nn/train.hpp"
#include "geadv/oracles.hpp"
#include "geadv/zoo.hpp"

namespace geadv::config {

namespace detail {

inline void check_keys(const Json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
void get_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace detail

/// Full run configuration. Every field has a documented default; unknown keys
/// are rejected so typos cannot silently fall back to defaults. The resolved
/// form (to_json) is echoed into report metadata for provenance.
struct RunConfig {
  uint64_t seed = 42;

  zoo::SyntheticDatasetConfig dataset;
  std::vector<std::string> archs = {"small_cnn_a", "small_cnn_b", "small_mlp", "tiny_attention"};
  nn::TrainConfig train;

  oracles::OracleConfig oracle = oracles::oracle_defaults(oracles::Method::fsps);
  attacks::AttackBudget budget;
  gan::GanTrainConfig gan;

  std::string surrogate = "small_cnn_a";
  std::vector<std::string> victims = {"small_cnn_b", "small_mlp", "tiny_attention"};
  int fps_batch_size = 100;
  int fps_warmup_batches = 1;
  int fps_timed_batches = 3;

  /// Fills cross-section defaults (attack-ball-derived radii and scales) and
  /// reseeds sections that were not explicitly seeded. Called after parsing
  /// and after any flag overrides.
  void resolve() {
    dataset.seed = dataset_seed_ ? *dataset_seed_ : mix_seed(seed, hash_tag("dataset"));
    train.seed = train_seed_ ? *train_seed_ : mix_seed(seed, hash_tag("train"));
    oracle.seed = oracle_seed_ ? *oracle_seed_ : mix_seed(seed, hash_tag("oracle"));
    budget.seed = budget_seed_ ? *budget_seed_ : mix_seed(seed, hash_tag("budget"));
    gan.seed = gan_seed_ ? *gan_seed_ : mix_seed(seed, hash_tag("gan"));
    if (!gra_radius_set_) oracle.gra_radius = budget.epsilon;
    if (!pixel_scale_set_) oracle.fsps_freq.pixel_noise_scale = budget.epsilon;
    if (!sp_lr_set_) oracle.fsps_sp_lr = budget.step_alpha;
    gan.epsilon = budget.epsilon;
    gan.oracle = oracle;
    validate();
  }

  void validate() const {
    dataset.validate();
    train.validate();
    budget.validate();
    gan.validate();
    if (archs.empty()) throw ConfigError("models.archs must not be empty");
    for (const auto& a : archs) {
      bool known = false;
      for (const auto& k : zoo::arch_ids()) known = known || k == a;
      if (!known) throw ConfigError("unknown arch '" + a + "' in models.archs");
    }
    if (fps_batch_size < 1 || fps_warmup_batches < 0 || fps_timed_batches < 1) {
      throw ConfigError("eval fps settings out of range");
    }
    // the oracle is validated on construction; attribution layer ids resolve
    // against the surrogate at use time
  }

  static RunConfig from_json(const Json& j) {
    using detail::check_keys;
    using detail::get_if;
    RunConfig c;
    check_keys(j, "config", {"seed", "dataset", "models", "oracle", "budget", "gan", "eval"});
    get_if(j, "seed", c.seed);

    if (j.contains("dataset")) {
      const Json& d = j.at("dataset");
      check_keys(d, "dataset", {"num_classes", "samples_per_class", "image_size", "seed"});
      get_if(d, "num_classes", c.dataset.num_classes);
      get_if(d, "samples_per_class", c.dataset.samples_per_class);
      get_if(d, "image_size", c.dataset.image_size);
      if (d.contains("seed")) c.dataset_seed_ = d.at("seed").get<uint64_t>();
    }
    if (j.contains("models")) {
      const Json& m = j.at("models");
      check_keys(m, "models", {"archs", "train"});
      get_if(m, "archs", c.archs);
      if (m.contains("train")) {
        const Json& t = m.at("train");
        check_keys(t, "models.train", {"epochs", "batch_size", "learning_rate", "seed"});
        get_if(t, "epochs", c.train.epochs);
        get_if(t, "batch_size", c.train.batch_size);
        get_if(t, "learning_rate", c.train.learning_rate);
        if (t.contains("seed")) c.train_seed_ = t.at("seed").get<uint64_t>();
      }
    }
    if (j.contains("oracle")) {
      c.parse_oracle(j.at("oracle"));
    }
    if (j.contains("budget")) {
      const Json& b = j.at("budget");
      check_keys(b, "budget",
                 {"epsilon", "step_alpha", "iterations", "random_start", "seed"});
      get_if(b, "epsilon", c.budget.epsilon);
      get_if(b, "step_alpha", c.budget.step_alpha);
      get_if(b, "iterations", c.budget.iterations);
      get_if(b, "random_start", c.budget.random_start);
      if (b.contains("seed")) c.budget_seed_ = b.at("seed").get<uint64_t>();
    }
    if (j.contains("gan")) {
      const Json& g = j.at("gan");
      check_keys(g, "gan",
                 {"epochs", "batch_size", "alpha", "beta", "adv_lambda", "eta_g", "eta_d",
                  "change_thresholds", "d_steps", "g_steps", "hinge_bound", "sign_cotangent",
                  "optimizer", "seed"});
      get_if(g, "epochs", c.gan.epochs);
      get_if(g, "batch_size", c.gan.batch_size);
      get_if(g, "alpha", c.gan.alpha);
      get_if(g, "beta", c.gan.beta);
      get_if(g, "adv_lambda", c.gan.adv_lambda);
      get_if(g, "eta_g", c.gan.eta_g);
      get_if(g, "eta_d", c.gan.eta_d);
      get_if(g, "change_thresholds", c.gan.change_thresholds);
      get_if(g, "d_steps", c.gan.d_steps);
      get_if(g, "g_steps", c.gan.g_steps);
      get_if(g, "hinge_bound", c.gan.hinge_bound);
      get_if(g, "sign_cotangent", c.gan.sign_cotangent);
      if (g.contains("optimizer")) {
        const std::string o = g.at("optimizer").get<std::string>();
        if (o == "adam") {
          c.gan.optimizer = gan::GanOptimizer::adam;
        } else if (o == "sgd") {
          c.gan.optimizer = gan::GanOptimizer::sgd;
        } else {
          throw ConfigError("gan.optimizer must be 'adam' or 'sgd'");
        }
      }
      if (g.contains("seed")) c.gan_seed_ = g.at("seed").get<uint64_t>();
    }
    if (j.contains("eval")) {
      const Json& e = j.at("eval");
      check_keys(e, "eval",
                 {"surrogate", "victims", "fps_batch_size", "fps_warmup_batches",
                  "fps_timed_batches"});
      get_if(e, "surrogate", c.surrogate);
      get_if(e, "victims", c.victims);
      get_if(e, "fps_batch_size", c.fps_batch_size);
      get_if(e, "fps_warmup_batches", c.fps_warmup_batches);
      get_if(e, "fps_timed_batches", c.fps_timed_batches);
    }
    c.resolve();
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
  }

  Json to_json() const {
    Json j;
    j["seed"] = seed;
    j["dataset"] = {{"num_classes", dataset.num_classes},
                    {"samples_per_class", dataset.samples_per_class},
                    {"image_size", dataset.image_size},
                    {"seed", dataset.seed}};
    j["models"] = {{"archs", archs},
                   {"train",
                    {{"epochs", train.epochs},
                     {"batch_size", train.batch_size},
                     {"learning_rate", train.learning_rate},
                     {"seed", train.seed}}}};
    j["oracle"] = oracle_to_json();
    j["budget"] = {{"epsilon", budget.epsilon},
                   {"step_alpha", budget.step_alpha},
                   {"iterations", budget.iterations},
                   {"random_start", budget.random_start},
                   {"seed", budget.seed}};
    j["gan"] = {{"epochs", gan.epochs},
                {"batch_size", gan.batch_size},
                {"alpha", gan.alpha},
                {"beta", gan.beta},
                {"adv_lambda", gan.adv_lambda},
                {"eta_g", gan.eta_g},
                {"eta_d", gan.eta_d},
                {"change_thresholds", gan.change_thresholds},
                {"d_steps", gan.d_steps},
                {"g_steps", gan.g_steps},
                {"hinge_bound", gan.hinge_bound},
                {"sign_cotangent", gan.sign_cotangent},
                {"optimizer", gan.optimizer == gan::GanOptimizer::adam ? "adam" : "sgd"},
                {"seed", gan.seed}};
    j["eval"] = {{"surrogate", surrogate},
                 {"victims", victims},
                 {"fps_batch_size", fps_batch_size},
                 {"fps_warmup_batches", fps_warmup_batches},
                 {"fps_timed_batches", fps_timed_batches}};
    return j;
  }

  std::string fingerprint() const { return json_fingerprint(to_json()); }

 private:
  void parse_oracle(const Json& o) {
    using detail::check_keys;
    using detail::get_if;
    check_keys(o, "oracle",
               {"method", "mu", "gra_temperature", "gra_neighbors", "gra_radius", "dim_prob",
                "dim_resize_range", "dim_copies", "tim_max_shift", "tim_copies", "tim_exact",
                "sinim_sigma", "sinim_copies", "fsps", "sia_blocks", "sia_copies", "attribution",
                "mig_steps", "seed"});
    std::string method = oracles::method_name(oracle.method);
    get_if(o, "method", method);
    oracle = oracles::oracle_defaults(oracles::method_from_name(method));
    get_if(o, "mu", oracle.mu);
    get_if(o, "gra_temperature", oracle.gra_temperature);
    get_if(o, "gra_neighbors", oracle.gra_neighbors);
    if (o.contains("gra_radius")) {
      oracle.gra_radius = o.at("gra_radius").get<double>();
      gra_radius_set_ = true;
    }
    get_if(o, "dim_prob", oracle.dim_prob);
    if (o.contains("dim_resize_range")) {
      const auto r = o.at("dim_resize_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("dim_resize_range must hold [low, high]");
      oracle.dim_resize_low = r[0];
      oracle.dim_resize_high = r[1];
    }
    get_if(o, "dim_copies", oracle.dim_copies);
    get_if(o, "tim_max_shift", oracle.tim_max_shift);
    get_if(o, "tim_copies", oracle.tim_copies);
    get_if(o, "tim_exact", oracle.tim_exact);
    get_if(o, "sinim_sigma", oracle.sinim_sigma);
    get_if(o, "sinim_copies", oracle.sinim_copies);
    if (o.contains("fsps")) {
      const Json& f = o.at("fsps");
      check_keys(f, "oracle.fsps",
                 {"num_variants", "sigma", "pixel_noise_scale", "warmup", "sp_max_steps",
                  "sp_grad_tol", "sp_lr"});
      get_if(f, "num_variants", oracle.fsps_freq.num_variants);
      get_if(f, "sigma", oracle.fsps_freq.sigma);
      if (f.contains("pixel_noise_scale")) {
        oracle.fsps_freq.pixel_noise_scale = f.at("pixel_noise_scale").get<double>();
        pixel_scale_set_ = true;
      }
      get_if(f, "warmup", oracle.fsps_warmup);
      get_if(f, "sp_max_steps", oracle.fsps_sp_max_steps);
      get_if(f, "sp_grad_tol", oracle.fsps_sp_grad_tol);
      if (f.contains("sp_lr")) {
        oracle.fsps_sp_lr = f.at("sp_lr").get<double>();
        sp_lr_set_ = true;
      }
    }
    get_if(o, "sia_blocks", oracle.sia_blocks);
    get_if(o, "sia_copies", oracle.sia_copies);
    if (o.contains("attribution")) {
      const Json& a = o.at("attribution");
      check_keys(a, "oracle.attribution", {"layer_id", "steps", "beta", "path_kind", "path_lr"});
      get_if(a, "layer_id", oracle.attribution.layer_id);
      get_if(a, "steps", oracle.attribution.steps);
      get_if(a, "beta", oracle.attribution.beta);
      if (a.contains("path_kind")) {
        const std::string p = a.at("path_kind").get<std::string>();
        if (p == "straight") {
          oracle.attribution.path_kind = attribution::PathKind::straight;
        } else if (p == "nonlinear") {
          oracle.attribution.path_kind = attribution::PathKind::nonlinear;
        } else {
          throw ConfigError("attribution.path_kind must be 'straight' or 'nonlinear'");
        }
      }
      get_if(a, "path_lr", oracle.attribution.path_lr);
    }
    get_if(o, "mig_steps", oracle.mig_steps);
    if (o.contains("seed")) oracle_seed_ = o.at("seed").get<uint64_t>();
  }

  Json oracle_to_json() const {
    Json o;
    o["method"] = oracles::method_name(oracle.method);
    o["mu"] = oracle.mu;
    o["gra_temperature"] = oracle.gra_temperature;
    o["gra_neighbors"] = oracle.gra_neighbors;
    o["gra_radius"] = oracle.gra_radius;
    o["dim_prob"] = oracle.dim_prob;
    o["dim_resize_range"] = {oracle.dim_resize_low, oracle.dim_resize_high};
    o["dim_copies"] = oracle.dim_copies;
    o["tim_max_shift"] = oracle.tim_max_shift;
    o["tim_copies"] = oracle.tim_copies;
    o["tim_exact"] = oracle.tim_exact;
    o["sinim_sigma"] = oracle.sinim_sigma;
    o["sinim_copies"] = oracle.sinim_copies;
    o["fsps"] = {{"num_variants", oracle.fsps_freq.num_variants},
                 {"sigma", oracle.fsps_freq.sigma},
                 {"pixel_noise_scale", oracle.fsps_freq.pixel_noise_scale},
                 {"warmup", oracle.fsps_warmup},
                 {"sp_max_steps", oracle.fsps_sp_max_steps},
                 {"sp_grad_tol", oracle.fsps_sp_grad_tol},
                 {"sp_lr", oracle.fsps_sp_lr}};
    o["sia_blocks"] = oracle.sia_blocks;
    o["sia_copies"] = oracle.sia_copies;
    o["attribution"] = {
        {"layer_id", oracle.attribution.layer_id},
        {"steps", oracle.attribution.steps},
        {"beta", oracle.attribution.beta},
        {"path_kind",
         oracle.attribution.path_kind == attribution::PathKind::straight ? "straight" : "nonlinear"},
        {"path_lr", oracle.attribution.path_lr}};
    o["mig_steps"] = oracle.mig_steps;
    o["seed"] = oracle.seed;
    return o;
  }

  std::optional<uint64_t> dataset_seed_, train_seed_, oracle_seed_, budget_seed_, gan_seed_;
  bool gra_radius_set_ = false, pixel_scale_set_ = false, sp_lr_set_ = false;
};

}  // namespace geadv::config
