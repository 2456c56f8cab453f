#pragma once

#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "geadv/attacks.hpp"
#include "geadv/config.hpp"
#include "geadv/eval.hpp"
#include "geadv/gan.hpp"
#include "geadv/zoo.hpp"

namespace geadv::pipeline {

using config::RunConfig;

inline std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  }
  return out;
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct ZooResult {
  std::map<std::string, nn::Classifier> models;
  std::map<std::string, nn::TrainMetrics> metrics;
};

/// Builds the dataset and trains every configured architecture on it.
inline ZooResult train_zoo(const RunConfig& cfg, const nn::ImageBatch& train,
                           const nn::ImageBatch& test, std::ostream* log = nullptr) {
  ZooResult out;
  for (const auto& arch : cfg.archs) {
    nn::Classifier init = zoo::build_model(arch, cfg.dataset.num_classes, cfg.dataset.image_size,
                                           mix_seed(cfg.train.seed, hash_tag(arch)));
    nn::TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.train.seed, hash_tag(arch), 1);
    auto [model, metrics] = nn::train_classifier(init, train, test, tc);
    if (log) {
      *log << "[zoo] " << arch << " train_acc=" << metrics.final_train_accuracy
           << " test_acc=" << metrics.final_test_accuracy << "\n";
    }
    out.models.emplace(arch, std::move(model));
    out.metrics.emplace(arch, std::move(metrics));
  }
  return out;
}

inline Json zoo_metrics_json(const ZooResult& fleet) {
  Json j = Json::object();
  for (const auto& [arch, m] : fleet.metrics) {
    j[arch] = {{"final_train_accuracy", m.final_train_accuracy},
               {"final_test_accuracy", m.final_test_accuracy},
               {"loss_curve", m.loss_curve}};
  }
  return j;
}

struct PipelineResult {
  eval::TransferReport transfer;    // deterministic under fixed seeds
  eval::TransferReport fps_report;  // wall-clock measurements, not reproducible
  ZooResult fleet;
  std::filesystem::path transfer_json, transfer_csv, fps_json, fps_csv;
};

/// The full desk-scale experiment: dataset, zoo, both adversarial-generator
/// trainings, the transfer matrix, and the throughput comparison. All outputs
/// land under out_dir. The transfer report is byte-reproducible under fixed
/// seeds; measured throughput lives in a separate report.
inline PipelineResult repro_all(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto [train, test] = zoo::make_synthetic_dataset(cfg.dataset);
  if (log) *log << "[data] train=" << train.size() << " test=" << test.size() << "\n";

  PipelineResult result;
  result.fleet = train_zoo(cfg, train, test, log);
  ZooResult& fleet = result.fleet;
  for (const auto& [arch, model] : fleet.models) {
    zoo::save_checkpoint(model, out_dir / "zoo" / arch);
  }
  write_json_file(out_dir / "zoo" / "metrics.json", zoo_metrics_json(fleet));

  const auto it = fleet.models.find(cfg.surrogate);
  if (it == fleet.models.end()) throw ConfigError("surrogate '" + cfg.surrogate + "' not in archs");
  const nn::Classifier& surrogate = it->second;

  // adversarial-generator trainings on the training split
  gan::GeneratorHandle g0 = gan::build_generator(cfg.dataset.image_size,
                                                 mix_seed(cfg.gan.seed, hash_tag("gen")));
  gan::DiscriminatorHandle d0 = gan::build_discriminator(cfg.dataset.image_size,
                                                         mix_seed(cfg.gan.seed, hash_tag("disc")));
  gan::GanTrainConfig gcfg = cfg.gan;
  if (gcfg.oracle.attribution.layer_id.empty()) {
    gcfg.oracle.attribution.layer_id = zoo::default_attribution_layer(cfg.surrogate);
  }
  if (log) *log << "[gan] training advgan baseline (" << gcfg.epochs << " epochs)\n";
  gan::GanTrainResult baseline = gan::train_advgan_baseline(g0, d0, surrogate, train, gcfg);
  if (log) *log << "[gan] training " << gan::method_tag(gcfg.oracle.method) << "\n";
  gan::GanTrainResult edited = gan::train_ge_advgan(g0, d0, surrogate, train, gcfg);

  Json provenance;
  provenance["config"] = cfg.to_json();
  provenance["config_hash"] = cfg.fingerprint();
  provenance["surrogate"] = cfg.surrogate;
  provenance["trainer"] = "advgan_baseline";
  gan::save_generator(out_dir / "gan" / "advgan", baseline.generator, provenance);
  provenance["trainer"] = gan::method_tag(gcfg.oracle.method);
  gan::save_generator(out_dir / "gan" / "ge_advgan", edited.generator, provenance);

  // transfer matrix on the held-out split
  const std::string edited_tag = gan::method_tag(gcfg.oracle.method);
  std::vector<eval::AttackMethod> methods;
  methods.push_back({"advgan", [&](const nn::Classifier&, const nn::ImageBatch& b) {
                       return gan::generate_adversarial(baseline.generator, b.data, cfg.budget.epsilon)
                           .x_adv;
                     }});
  methods.push_back({edited_tag, [&](const nn::Classifier&, const nn::ImageBatch& b) {
                       return gan::generate_adversarial(edited.generator, b.data, cfg.budget.epsilon)
                           .x_adv;
                     }});

  std::vector<eval::NamedModel> surrogates = {{cfg.surrogate, &surrogate}};
  std::vector<eval::NamedModel> victims;
  for (const auto& v : cfg.victims) {
    auto vit = fleet.models.find(v);
    if (vit == fleet.models.end()) throw ConfigError("victim '" + v + "' not in archs");
    victims.push_back({v, &vit->second});
  }

  Json metadata;
  metadata["config"] = cfg.to_json();
  metadata["config_hash"] = cfg.fingerprint();
  metadata["seed"] = cfg.seed;
  metadata["epsilon"] = cfg.budget.epsilon;
  metadata["success_convention"] = "prediction change vs the model's own clean prediction";
  Json accs = Json::object();
  for (const auto& [arch, m] : fleet.metrics) accs[arch] = m.final_test_accuracy;
  metadata["clean_test_accuracy"] = accs;
  Json params = Json::object();
  for (const auto& [arch, model] : fleet.models) params[arch] = model.net.param_count();
  params["generator"] = edited.generator.param_count();
  metadata["param_counts"] = params;

  result.transfer = eval::transfer_matrix(methods, surrogates, victims, test, metadata);
  result.transfer.timestamp = iso_timestamp();

  // persist crafted tensors for each generative method
  for (const auto& m : methods) {
    attacks::AdversarialResult crafted;
    crafted.x_adv = m.craft(surrogate, test);
    crafted.delta = crafted.x_adv;
    crafted.delta -= test.data;
    attacks::AttackBudget budget = cfg.budget;
    attacks::save_adversarial_batch(out_dir / "adv" / sanitize(m.name), crafted, m.name, budget);
  }

  // throughput: generator inference vs the iterative frequency attack
  eval::TransferReport fps;
  fps.metadata = metadata;
  fps.methods = {edited_tag, "fsps_iterative"};
  fps.fps[edited_tag] = eval::fps_benchmark(
      [&](const nn::ImageBatch& b) {
        gan::generate_adversarial(edited.generator, b.data, cfg.budget.epsilon);
      },
      test, cfg.fps_warmup_batches, cfg.fps_timed_batches, cfg.fps_batch_size);
  oracles::OracleConfig ocfg = gcfg.oracle;
  ocfg.method = oracles::Method::fsps;
  fps.fps["fsps_iterative"] = eval::fps_benchmark(
      [&](const nn::ImageBatch& b) {
        oracles::GradientOracle oracle = oracles::make_oracle(ocfg, surrogate);
        attacks::iterative_attack(surrogate, b.data, b.labels, oracle, cfg.budget);
      },
      test, 0, 1, cfg.fps_batch_size);
  fps.timestamp = iso_timestamp();
  result.fps_report = fps;

  result.transfer_json = out_dir / "transfer_report.json";
  result.transfer_csv = out_dir / "transfer_report.csv";
  result.fps_json = out_dir / "fps_report.json";
  result.fps_csv = out_dir / "fps_report.csv";
  eval::write_report(result.transfer, result.transfer_json, eval::ReportFormat::json);
  eval::write_report(result.transfer, result.transfer_csv, eval::ReportFormat::csv);
  eval::write_report(result.fps_report, result.fps_json, eval::ReportFormat::json);
  eval::write_report(result.fps_report, result.fps_csv, eval::ReportFormat::csv);
  if (log) {
    for (const auto& c : result.transfer.cells) {
      *log << "[transfer] " << c.method << " " << c.surrogate << "->" << c.victim << " asr="
           << (c.self ? std::string("self") : std::to_string(c.asr)) << "\n";
    }
    for (const auto& [m, v] : result.fps_report.fps) *log << "[fps] " << m << " " << v << "\n";
  }
  return result;
}

}  // namespace geadv::pipeline
