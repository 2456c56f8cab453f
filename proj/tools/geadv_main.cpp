// Command-line entry point for the gradient-editing adversarial toolkit.
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "geadv/geadv.hpp"

namespace {

using namespace geadv;

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed_flag;
  std::string device = "cpu";
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "JSON run configuration");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed_flag, "override the global seed");
  cmd->add_option("--device", opts.device, "compute device (cpu only)")->default_str("cpu");
}

config::RunConfig load_config(const CommonOpts& opts) {
  config::RunConfig cfg =
      opts.config_path.empty() ? config::RunConfig{} : config::RunConfig::load(opts.config_path);
  if (const char* env = std::getenv("GRADEDIT_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
  if (opts.seed_flag) cfg.seed = *opts.seed_flag;
  if (opts.device != "cpu") throw ConfigError("only --device cpu is supported");
  cfg.resolve();
  std::cout << "resolved config hash: " << cfg.fingerprint() << "\n";
  return cfg;
}

nn::ImageBatch pick_split(const config::RunConfig& cfg, bool test_split) {
  auto [train, test] = zoo::make_synthetic_dataset(cfg.dataset);
  return test_split ? std::move(test) : std::move(train);
}

int cmd_zoo_train(const CommonOpts& opts, const std::string& out_dir) {
  config::RunConfig cfg = load_config(opts);
  auto [train, test] = zoo::make_synthetic_dataset(cfg.dataset);
  pipeline::ZooResult fleet = pipeline::train_zoo(cfg, train, test, &std::cout);
  for (const auto& [arch, model] : fleet.models) {
    zoo::save_checkpoint(model, std::filesystem::path(out_dir) / arch);
  }
  write_json_file(std::filesystem::path(out_dir) / "metrics.json",
                  pipeline::zoo_metrics_json(fleet));
  std::cout << "wrote checkpoints under " << out_dir << "\n";
  return 0;
}

int cmd_attack(const CommonOpts& opts, const std::string& surrogate_ckpt, std::string method,
               const std::string& out_dir, std::optional<double> eps_flag,
               std::optional<int> iters_flag) {
  config::RunConfig cfg = load_config(opts);
  if (eps_flag) cfg.budget.epsilon = *eps_flag;
  if (iters_flag) cfg.budget.iterations = *iters_flag;
  cfg.resolve();
  nn::Classifier surrogate = zoo::load_checkpoint(surrogate_ckpt);
  oracles::OracleConfig ocfg = cfg.oracle;
  if (!method.empty()) {
    oracles::Method m = oracles::method_from_name(method);
    if (m != ocfg.method) {
      oracles::OracleConfig fresh = oracles::oracle_defaults(m);
      fresh.seed = ocfg.seed;
      fresh.gra_radius = cfg.budget.epsilon;
      fresh.fsps_freq = ocfg.fsps_freq;
      fresh.attribution = ocfg.attribution;
      fresh.attribution.path_kind = m == oracles::Method::danaa
                                        ? attribution::PathKind::nonlinear
                                        : attribution::PathKind::straight;
      ocfg = fresh;
    }
  }
  if (ocfg.attribution.layer_id.empty()) {
    ocfg.attribution.layer_id = zoo::default_attribution_layer(surrogate.arch_id);
  }
  nn::ImageBatch batch = pick_split(cfg, /*test_split=*/true);
  oracles::GradientOracle oracle = oracles::make_oracle(ocfg, surrogate);
  attacks::AdversarialResult res =
      attacks::iterative_attack(surrogate, batch.data, batch.labels, oracle, cfg.budget);
  double success = 0;
  for (auto s : res.success) success += s;
  success /= std::max<size_t>(1, res.success.size());
  Json extra;
  extra["config"] = cfg.to_json();
  extra["config_hash"] = cfg.fingerprint();
  extra["surrogate_arch"] = surrogate.arch_id;
  attacks::save_adversarial_batch(out_dir, res, oracles::method_name(ocfg.method), cfg.budget,
                                  extra, &batch.data);
  std::cout << "method=" << oracles::method_name(ocfg.method)
            << " white-box success=" << success << " wrote " << out_dir << "\n";
  return 0;
}

int cmd_gan_train(const CommonOpts& opts, const std::string& surrogate_ckpt,
                  const std::string& method, const std::string& out_dir) {
  config::RunConfig cfg = load_config(opts);
  nn::Classifier surrogate = zoo::load_checkpoint(surrogate_ckpt);
  nn::ImageBatch train = pick_split(cfg, /*test_split=*/false);
  gan::GeneratorHandle g =
      gan::build_generator(cfg.dataset.image_size, mix_seed(cfg.gan.seed, hash_tag("gen")));
  gan::DiscriminatorHandle d =
      gan::build_discriminator(cfg.dataset.image_size, mix_seed(cfg.gan.seed, hash_tag("disc")));
  gan::GanTrainConfig gcfg = cfg.gan;
  std::string tag;
  gan::GanTrainResult trained = [&] {
    if (method == "baseline") {
      tag = "advgan";
      return gan::train_advgan_baseline(g, d, surrogate, train, gcfg);
    }
    gcfg.oracle = cfg.oracle;
    gcfg.oracle.method = oracles::method_from_name(method);
    if (gcfg.oracle.attribution.layer_id.empty()) {
      gcfg.oracle.attribution.layer_id = zoo::default_attribution_layer(surrogate.arch_id);
    }
    tag = gan::method_tag(gcfg.oracle.method);
    return gan::train_ge_advgan(g, d, surrogate, train, gcfg);
  }();
  Json provenance;
  provenance["config"] = cfg.to_json();
  provenance["config_hash"] = cfg.fingerprint();
  provenance["surrogate_arch"] = surrogate.arch_id;
  provenance["trainer"] = tag;
  gan::save_generator(out_dir, trained.generator, provenance);
  std::cout << "trained " << tag << ", generator params=" << trained.generator.param_count()
            << ", wrote " << out_dir << "\n";
  return 0;
}

int cmd_gan_generate(const CommonOpts& opts, const std::string& generator_ckpt,
                     const std::string& dataset_dir, const std::string& out_dir,
                     std::optional<double> eps_flag) {
  config::RunConfig cfg = load_config(opts);
  if (eps_flag) cfg.budget.epsilon = *eps_flag;
  gan::GeneratorHandle g = gan::load_generator(generator_ckpt);
  nn::ImageBatch batch =
      dataset_dir.empty() ? pick_split(cfg, true) : zoo::load_tensor_dataset(dataset_dir);
  attacks::AdversarialResult res = gan::generate_adversarial(g, batch.data, cfg.budget.epsilon);
  Json extra;
  extra["generator"] = generator_ckpt;
  extra["config_hash"] = cfg.fingerprint();
  attacks::save_adversarial_batch(out_dir, res, "generator", cfg.budget, extra, &batch.data);
  std::cout << "generated " << batch.size() << " adversarial images into " << out_dir << "\n";
  return 0;
}

int cmd_eval_transfer(const CommonOpts& opts, const std::vector<std::string>& crafted_dirs,
                      const std::vector<std::string>& victim_ckpts, const std::string& out_report) {
  config::RunConfig cfg = load_config(opts);
  std::vector<nn::Classifier> victims;
  victims.reserve(victim_ckpts.size());
  for (const auto& p : victim_ckpts) victims.push_back(zoo::load_checkpoint(p));

  eval::TransferReport report;
  report.metadata["config"] = cfg.to_json();
  report.metadata["config_hash"] = cfg.fingerprint();
  report.metadata["seed"] = cfg.seed;
  report.metadata["epsilon"] = cfg.budget.epsilon;
  for (const auto& v : victims) report.victims.push_back(v.arch_id);
  for (const auto& dir : crafted_dirs) {
    auto [res, sidecar] = attacks::load_adversarial_batch(dir);
    Tensor x_clean = getf::read(std::filesystem::path(dir) / "x_clean.getf");
    const std::string method = sidecar.value("method", dir);
    const std::string surrogate =
        sidecar.contains("config") ? sidecar["config"].value("surrogate_arch", "surrogate")
                                   : "surrogate";
    report.methods.push_back(method);
    if (report.surrogates.empty()) report.surrogates.push_back(surrogate);
    for (const auto& v : victims) {
      eval::TransferCell cell;
      cell.method = method;
      cell.surrogate = surrogate;
      cell.victim = v.arch_id;
      if (v.arch_id == surrogate) {
        cell.self = true;
      } else {
        cell.asr = eval::asr(v, x_clean, res.x_adv);
      }
      report.cells.push_back(cell);
    }
  }
  report.timestamp = pipeline::iso_timestamp();
  const std::filesystem::path path(out_report);
  eval::write_report(report, path,
                     path.extension() == ".csv" ? eval::ReportFormat::csv
                                                : eval::ReportFormat::json);
  std::cout << "wrote " << out_report << "\n";
  return 0;
}

int cmd_bench_fps(const CommonOpts& opts, const std::string& surrogate_ckpt,
                  const std::string& generator_ckpt, const std::string& out_report) {
  config::RunConfig cfg = load_config(opts);
  nn::Classifier surrogate = zoo::load_checkpoint(surrogate_ckpt);
  nn::ImageBatch test = pick_split(cfg, true);
  eval::TransferReport report;
  report.metadata["config"] = cfg.to_json();
  report.metadata["config_hash"] = cfg.fingerprint();
  if (!generator_ckpt.empty()) {
    gan::GeneratorHandle g = gan::load_generator(generator_ckpt);
    report.fps["generator"] = eval::fps_benchmark(
        [&](const nn::ImageBatch& b) {
          gan::generate_adversarial(g, b.data, cfg.budget.epsilon);
        },
        test, cfg.fps_warmup_batches, cfg.fps_timed_batches, cfg.fps_batch_size);
  }
  oracles::OracleConfig ocfg = cfg.oracle;
  if (ocfg.attribution.layer_id.empty()) {
    ocfg.attribution.layer_id = zoo::default_attribution_layer(surrogate.arch_id);
  }
  report.fps[std::string(oracles::method_name(ocfg.method)) + "_iterative"] = eval::fps_benchmark(
      [&](const nn::ImageBatch& b) {
        oracles::GradientOracle oracle = oracles::make_oracle(ocfg, surrogate);
        attacks::iterative_attack(surrogate, b.data, b.labels, oracle, cfg.budget);
      },
      test, 0, 1, cfg.fps_batch_size);
  report.timestamp = pipeline::iso_timestamp();
  const std::filesystem::path path(out_report);
  eval::write_report(report, path,
                     path.extension() == ".csv" ? eval::ReportFormat::csv
                                                : eval::ReportFormat::json);
  for (const auto& [m, v] : report.fps) std::cout << m << ": " << v << " fps\n";
  std::cout << "wrote " << out_report << "\n";
  return 0;
}

int cmd_repro_all(const CommonOpts& opts, const std::string& out_dir) {
  config::RunConfig cfg = load_config(opts);
  pipeline::PipelineResult r = pipeline::repro_all(cfg, out_dir, &std::cout);
  std::cout << "reports: " << r.transfer_json.string() << ", " << r.fps_json.string() << "\n";
  return 0;
}

int cmd_plot(const std::string& report_path, const std::string& out_png) {
  eval::TransferReport report = eval::read_report(report_path);
  plot::plot_asr(report, out_png);
  std::cout << "wrote " << out_png << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-editing adversarial attack toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string out_dir = "out";
  std::string surrogate_ckpt, generator_ckpt, method, dataset_dir, report_path, out_png;
  std::vector<std::string> crafted_dirs, victim_ckpts;
  std::optional<double> eps_flag;
  std::optional<int> iters_flag;

  auto* zoo_train = app.add_subcommand("zoo-train", "build the dataset and train all zoo models");
  add_common(zoo_train, opts);
  zoo_train->add_option("--out", out_dir, "output directory")->required();

  auto* attack = app.add_subcommand("attack", "run the iterative attack for one oracle");
  add_common(attack, opts);
  attack->add_option("--surrogate", surrogate_ckpt, "surrogate checkpoint directory")->required();
  attack->add_option("--method", method,
                     "oracle: bim pgd mim gra dim tim sinim fsps sia naa danaa mig");
  attack->add_option("--epsilon", eps_flag, "L-inf budget (defaults to 16/255)");
  attack->add_option("--iterations", iters_flag, "attack iterations (default 10)");
  attack->add_option("--out", out_dir, "output directory")->required();

  auto* gan_train = app.add_subcommand("gan-train", "train the AdvGAN baseline or an edited variant");
  add_common(gan_train, opts);
  gan_train->add_option("--surrogate", surrogate_ckpt, "surrogate checkpoint directory")->required();
  gan_train->add_option("--method", method, "'baseline' or an oracle name")->required();
  gan_train->add_option("--out", out_dir, "generator checkpoint directory")->required();

  auto* gan_generate = app.add_subcommand("gan-generate", "fast-path adversarial generation");
  add_common(gan_generate, opts);
  gan_generate->add_option("--generator", generator_ckpt, "generator checkpoint")->required();
  gan_generate->add_option("--dataset", dataset_dir,
                           "tensor dataset directory (default: synthetic test split)");
  gan_generate->add_option("--epsilon", eps_flag, "L-inf budget (defaults to 16/255)");
  gan_generate->add_option("--out", out_dir, "output directory")->required();

  auto* eval_transfer = app.add_subcommand("eval-transfer", "score crafted batches on victims");
  add_common(eval_transfer, opts);
  eval_transfer->add_option("--crafted", crafted_dirs, "crafted batch directories")->required();
  eval_transfer->add_option("--victims", victim_ckpts, "victim checkpoint directories")->required();
  eval_transfer->add_option("--out-report", report_path, "report path (.json or .csv)")->required();

  auto* bench = app.add_subcommand("bench-fps", "crafting throughput comparison");
  add_common(bench, opts);
  bench->add_option("--surrogate", surrogate_ckpt, "surrogate checkpoint directory")->required();
  bench->add_option("--generator", generator_ckpt, "generator checkpoint directory");
  bench->add_option("--out-report", report_path, "report path (.json or .csv)")->required();

  auto* repro = app.add_subcommand("repro-all", "full desk-scale pipeline");
  add_common(repro, opts);
  repro->add_option("--out", out_dir, "output directory")->required();

  auto* plot_cmd = app.add_subcommand("plot", "bar chart of ASR per victim");
  plot_cmd->add_option("--report", report_path, "transfer report (.json or .csv)")->required();
  plot_cmd->add_option("--out", out_png, "output PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (zoo_train->parsed()) return cmd_zoo_train(opts, out_dir);
    if (attack->parsed()) return cmd_attack(opts, surrogate_ckpt, method, out_dir, eps_flag, iters_flag);
    if (gan_train->parsed()) return cmd_gan_train(opts, surrogate_ckpt, method, out_dir);
    if (gan_generate->parsed())
      return cmd_gan_generate(opts, generator_ckpt, dataset_dir, out_dir, eps_flag);
    if (eval_transfer->parsed())
      return cmd_eval_transfer(opts, crafted_dirs, victim_ckpts, report_path);
    if (bench->parsed()) return cmd_bench_fps(opts, surrogate_ckpt, generator_ckpt, report_path);
    if (repro->parsed()) return cmd_repro_all(opts, out_dir);
    if (plot_cmd->parsed()) return cmd_plot(report_path, out_png);
  } catch (const geadv::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const geadv::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
