#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "geadv/io.hpp"
#include "geadv/nn/model.hpp"

namespace geadv::eval {

using nn::Classifier;
using nn::ImageBatch;

/// Fraction of samples whose top-1 prediction differs between the clean and
/// adversarial inputs. Alteration is measured against the model's own clean
/// prediction; argmax ties break to the lowest class index on both sides.
inline double asr(const Classifier& model, const Tensor& x_clean, const Tensor& x_adv) {
  if (!x_clean.same_shape(x_adv)) throw ContractError("asr: shape mismatch");
  const auto clean = model.predict(x_clean);
  const auto adv = model.predict(x_adv);
  if (clean.empty()) return 0.0;
  int altered = 0;
  for (size_t i = 0; i < clean.size(); ++i) altered += clean[i] != adv[i];
  return double(altered) / double(clean.size());
}

struct NamedModel {
  std::string id;
  const Classifier* model = nullptr;
};

/// Crafts adversarial inputs for a batch on the given surrogate.
using CraftFn = std::function<Tensor(const Classifier& surrogate, const ImageBatch& batch)>;

struct AttackMethod {
  std::string name;
  CraftFn craft;
};

struct TransferCell {
  std::string method, surrogate, victim;
  double asr = 0.0;
  bool self = false;  // victim == surrogate; no transfer number reported
};

struct TransferReport {
  std::vector<std::string> methods;
  std::vector<std::string> surrogates;
  std::vector<std::string> victims;
  std::vector<TransferCell> cells;
  std::map<std::string, double> fps;  // method -> crafted images per second
  Json metadata = Json::object();     // config snapshot, seeds, clean accuracies
  std::string timestamp;              // kept apart so reports stay reproducible

  const TransferCell& at(const std::string& method, const std::string& surrogate,
                         const std::string& victim) const {
    for (const auto& c : cells) {
      if (c.method == method && c.surrogate == surrogate && c.victim == victim) return c;
    }
    throw ContractError("report cell not found: " + method + "/" + surrogate + "/" + victim);
  }
};

/// Crafts once per (method, surrogate) and scores the same tensors on every
/// victim. The surrogate-as-victim cell is marked self rather than scored.
inline TransferReport transfer_matrix(const std::vector<AttackMethod>& methods,
                                      const std::vector<NamedModel>& surrogates,
                                      const std::vector<NamedModel>& victims,
                                      const ImageBatch& eval_set,
                                      Json metadata = Json::object()) {
  TransferReport report;
  report.metadata = std::move(metadata);
  for (const auto& m : methods) report.methods.push_back(m.name);
  for (const auto& s : surrogates) report.surrogates.push_back(s.id);
  for (const auto& v : victims) report.victims.push_back(v.id);
  Json white_box = Json::object();
  for (const auto& method : methods) {
    for (const auto& surrogate : surrogates) {
      const Tensor x_adv = method.craft(*surrogate.model, eval_set);
      if (!x_adv.same_shape(eval_set.data)) {
        throw ContractError("craft function changed the batch shape");
      }
      white_box[method.name][surrogate.id] = asr(*surrogate.model, eval_set.data, x_adv);
      for (const auto& victim : victims) {
        TransferCell cell;
        cell.method = method.name;
        cell.surrogate = surrogate.id;
        cell.victim = victim.id;
        if (victim.id == surrogate.id) {
          cell.self = true;
        } else {
          cell.asr = asr(*victim.model, eval_set.data, x_adv);
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  // white-box success on the crafting model, for reference
  report.metadata["white_box_asr"] = white_box;
  return report;
}

/// Wall-clock crafting throughput in images per second, measured over
/// timed_batches after warmup_batches, cycling through the dataset.
inline double fps_benchmark(const std::function<void(const ImageBatch&)>& attack_fn,
                            const ImageBatch& dataset, int warmup_batches, int timed_batches,
                            int batch_size) {
  if (batch_size < 1 || timed_batches < 1) throw ConfigError("fps_benchmark: bad batch counts");
  const int n = dataset.size();
  if (n < 1) throw ContractError("fps_benchmark: empty dataset");
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  int cursor = 0;
  auto next_batch = [&]() {
    ImageBatch b;
    const int take = std::min(batch_size, n);
    b.data = Tensor({take, dataset.data.dim(1), dataset.data.dim(2), dataset.data.dim(3)});
    const int64_t stride = dataset.data.numel() / n;
    for (int i = 0; i < take; ++i) {
      const int src = (cursor + i) % n;
      std::copy(dataset.data.data() + int64_t(src) * stride,
                dataset.data.data() + int64_t(src + 1) * stride, b.data.data() + int64_t(i) * stride);
      b.labels.push_back(dataset.labels[static_cast<size_t>(src)]);
    }
    cursor = (cursor + take) % n;
    return b;
  };
  for (int i = 0; i < warmup_batches; ++i) attack_fn(next_batch());
  int64_t images = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < timed_batches; ++i) {
    ImageBatch b = next_batch();
    images += b.size();
    attack_fn(b);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return double(images) / std::max(1e-9, secs);
}

// ---------------------------------------------------------------------------
// Report serialization.

enum class ReportFormat { csv, json };

namespace detail {

inline std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace detail

inline Json report_to_json(const TransferReport& r) {
  Json j;
  j["methods"] = r.methods;
  j["surrogates"] = r.surrogates;
  j["victims"] = r.victims;
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json e;
    e["method"] = c.method;
    e["surrogate"] = c.surrogate;
    e["victim"] = c.victim;
    if (c.self) {
      e["self"] = true;
    } else {
      e["asr"] = c.asr;
    }
    cells.push_back(std::move(e));
  }
  j["cells"] = cells;
  j["fps"] = r.fps;
  j["metadata"] = r.metadata;
  if (!r.timestamp.empty()) j["timestamp"] = r.timestamp;
  return j;
}

inline TransferReport report_from_json(const Json& j) {
  TransferReport r;
  r.methods = j.value("methods", std::vector<std::string>{});
  r.surrogates = j.value("surrogates", std::vector<std::string>{});
  r.victims = j.value("victims", std::vector<std::string>{});
  for (const auto& e : j.value("cells", Json::array())) {
    TransferCell c;
    c.method = e.at("method").get<std::string>();
    c.surrogate = e.at("surrogate").get<std::string>();
    c.victim = e.at("victim").get<std::string>();
    c.self = e.value("self", false);
    if (!c.self) c.asr = e.at("asr").get<double>();
    r.cells.push_back(std::move(c));
  }
  if (j.contains("fps")) r.fps = j.at("fps").get<std::map<std::string, double>>();
  r.metadata = j.value("metadata", Json::object());
  r.timestamp = j.value("timestamp", "");
  return r;
}

/// CSV columns: method,surrogate,victim,asr,fps,epsilon,seed. Self cells carry
/// the literal "self" in the asr field; unmeasured fps cells stay empty.
inline void write_report(const TransferReport& r, const std::filesystem::path& path,
                         ReportFormat format) {
  if (format == ReportFormat::json) {
    write_json_file(path, report_to_json(r));
    return;
  }
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for write: " + path.string());
  os << "method,surrogate,victim,asr,fps,epsilon,seed\n";
  const std::string epsilon = r.metadata.contains("epsilon")
                                  ? detail::fmt(r.metadata["epsilon"].get<double>(), "%.8f")
                                  : "";
  const std::string seed =
      r.metadata.contains("seed") ? std::to_string(r.metadata["seed"].get<uint64_t>()) : "";
  for (const auto& c : r.cells) {
    os << c.method << ',' << c.surrogate << ',' << c.victim << ',';
    os << (c.self ? "self" : detail::fmt(c.asr, "%.6f")) << ',';
    auto it = r.fps.find(c.method);
    os << (it != r.fps.end() ? detail::fmt(it->second, "%.3f") : "") << ',';
    os << epsilon << ',' << seed << '\n';
  }
}

inline TransferReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "method,surrogate,victim,asr,fps,epsilon,seed") {
    throw ParseError("bad CSV header in " + path.string());
  }
  TransferReport r;
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    for (const auto& e : v) {
      if (e == s) return;
    }
    v.push_back(s);
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    fields.resize(7);
    TransferCell c;
    c.method = fields[0];
    c.surrogate = fields[1];
    c.victim = fields[2];
    if (fields[3] == "self") {
      c.self = true;
    } else {
      c.asr = std::stod(fields[3]);
    }
    if (!fields[4].empty()) r.fps[c.method] = std::stod(fields[4]);
    if (!fields[5].empty()) r.metadata["epsilon"] = std::stod(fields[5]);
    if (!fields[6].empty()) r.metadata["seed"] = static_cast<uint64_t>(std::stoull(fields[6]));
    remember(r.methods, c.method);
    remember(r.surrogates, c.surrogate);
    remember(r.victims, c.victim);
    r.cells.push_back(std::move(c));
  }
  return r;
}

inline TransferReport read_report(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_report_csv(path);
  return report_from_json(read_json_file(path));
}

}  // namespace geadv::eval
