#include "cafv/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "cafv/checkpoint.hpp"
#include "cafv/config.hpp"
#include "cafv/data.hpp"
#include "cafv/errors.hpp"
#include "cafv/experiment.hpp"
#include "cafv/grad_check.hpp"
#include "cafv/log.hpp"
#include "cafv/losses.hpp"
#include "cafv/metrics.hpp"
#include "cafv/models.hpp"
#include "cafv/sha256.hpp"
#include "cafv/svg.hpp"
#include "cafv/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace cafv::cli {

namespace {

std::string dtos(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string now_utc_iso() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' into place: " + ec.message());
}

// Options shared by every subcommand (parsed at the top level, falling
// through from the subcommand's argument list).
struct GlobalOpts {
  std::string out;
  std::string config;
  std::string format;  // "", "csv" or "binary"
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
  std::string cmdline;
};

FileFormat format_for(const std::string& path, const std::string& flag) {
  if (!flag.empty()) return file_format_from_name(flag);
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0
             ? FileFormat::Binary
             : FileFormat::Csv;
}

const char* extension_for(FileFormat f) { return f == FileFormat::Csv ? "csv" : "bin"; }

// Collects the files a run produces and closes the run with a manifest that
// lists each one with its checksum. The manifest lands atomically so a
// half-written run can never look finished.
class RunWriter {
 public:
  explicit RunWriter(const std::string& out_dir) : out_(out_dir), started_(now_utc_iso()) {
    if (out_.empty()) throw ValidationError("--out is required for this command");
    fs::create_directories(out_);
  }

  std::string path(const std::string& rel) const { return out_ + "/" + rel; }

  void write(const std::string& rel, const std::string& content) {
    const fs::path full = path(rel);
    if (full.has_parent_path()) fs::create_directories(full.parent_path());
    write_file_atomic(full.string(), content);
    record(rel);
  }

  void record(const std::string& rel) { outputs_.push_back(rel); }

  void finish(const std::string& subcommand, const std::string& cmdline,
              nlohmann::json config, std::uint64_t seed, std::vector<std::string> inputs) {
    std::sort(outputs_.begin(), outputs_.end());
    nlohmann::json listed = nlohmann::json::array();
    for (const std::string& rel : outputs_) {
      listed.push_back({{"path", rel}, {"sha256", sha256_file_hex(path(rel))}});
    }
    const nlohmann::json manifest = {
        {"command", cmdline},        {"config", std::move(config)},
        {"finished_at", now_utc_iso()}, {"inputs", std::move(inputs)},
        {"outputs", std::move(listed)}, {"seed", seed},
        {"started_at", started_},    {"subcommand", subcommand},
        {"tool_version", kToolVersion}};
    write_file_atomic(path("run_manifest.json"), manifest.dump(2) + "\n");
  }

 private:
  std::string out_;
  std::string started_;
  std::vector<std::string> outputs_;
};

// When no --config is given, the defaults adapt their width to the data;
// an explicit config is taken literally and must match.
TrainConfig resolve_config(const GlobalOpts& g, const Dataset* data) {
  TrainConfig cfg;
  if (!g.config.empty()) {
    cfg = load_config_file(g.config);
  } else if (data != nullptr) {
    cfg.feature_dim = data->d_f;
  }
  if (g.seed_set) cfg.seed = g.seed;
  cfg.validate();
  return cfg;
}

SyntheticSpec spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed synthetic spec: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("synthetic spec must be a JSON object");
  SyntheticSpec spec = default_benchmark_spec();
  bool classes_set = false, counts_set = false;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "num_classes") {
        spec.num_classes = value.get<std::size_t>();
        classes_set = true;
      } else if (key == "d_f") {
        spec.d_f = value.get<std::size_t>();
      } else if (key == "sigma") {
        spec.sigma = value.get<double>();
      } else if (key == "counts") {
        spec.counts = value.get<std::vector<std::size_t>>();
        counts_set = true;
      } else if (key == "first_label") {
        spec.first_label = value.get<int>();
      } else if (key == "seed") {
        spec.seed = value.get<std::uint64_t>();
      } else if (key == "mu1") {
        spec.mu1 = Tensor::vec(value.get<std::vector<double>>());
      } else if (key == "drift") {
        spec.drift = Tensor::vec(value.get<std::vector<double>>());
      } else {
        throw ValidationError("unknown key '" + key + "' in synthetic spec");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid synthetic spec value: ") + e.what());
  }
  if (classes_set && !counts_set) {
    throw ValidationError("synthetic spec sets num_classes; provide matching counts too");
  }
  return spec;
}

std::string spec_to_json(const SyntheticSpec& spec) {
  nlohmann::json j;
  j["counts"] = spec.counts;
  j["d_f"] = spec.d_f;
  j["drift"] = spec.drift.data;
  j["first_label"] = spec.first_label;
  j["mu1"] = spec.mu1.data;
  j["num_classes"] = spec.num_classes;
  j["seed"] = spec.seed;
  j["sigma"] = spec.sigma;
  return j.dump(2) + "\n";
}

std::string prototypes_csv(const SyntheticBenchmark& bench) {
  std::string out = "label";
  const std::size_t d_f = bench.spec.d_f;
  for (std::size_t j = 0; j < d_f; ++j) out += ",f" + std::to_string(j);
  out += "\n";
  for (std::size_t k = 0; k < bench.labels.size(); ++k) {
    out += std::to_string(bench.labels[k]);
    for (double v : bench.prototypes[k].data) out += "," + dtos(v);
    out += "\n";
  }
  return out;
}

std::string losses_csv(const std::vector<LossBreakdown>& history) {
  std::string out = "step,gan_xy,gan_yx,cycle,cls_x,cls_y,penalty_x,penalty_y,total\n";
  for (const LossBreakdown& h : history) {
    out += std::to_string(h.step);
    for (double v : {h.gan_xy, h.gan_yx, h.cycle, h.cls_x, h.cls_y, h.penalty_x,
                     h.penalty_y, h.total}) {
      out += "," + dtos(v);
    }
    out += "\n";
  }
  return out;
}

std::string epoch_losses_csv(const std::vector<double>& losses) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) {
    out += std::to_string(e) + "," + dtos(losses[e]) + "\n";
  }
  return out;
}

ClassifierResult classifier_from_bundle(const ModelBundle& b) {
  ClassifierResult cls;
  cls.spec = b.classifier;
  cls.params.add(cls.spec.w(), b.params.value(cls.spec.w()));
  cls.params.add(cls.spec.b(), b.params.value(cls.spec.b()));
  return cls;
}

std::pair<std::string, FileFormat> find_split(const std::string& dir, const std::string& stem,
                                              const std::string& format_flag) {
  if (!format_flag.empty()) {
    const FileFormat f = file_format_from_name(format_flag);
    const std::string p = dir + "/" + stem + "." + extension_for(f);
    if (!fs::exists(p)) throw ValidationError("no " + stem + " file at '" + p + "'");
    return {p, f};
  }
  const std::string csv = dir + "/" + stem + ".csv";
  if (fs::exists(csv)) return {csv, FileFormat::Csv};
  const std::string bin = dir + "/" + stem + ".bin";
  if (fs::exists(bin)) return {bin, FileFormat::Binary};
  throw ValidationError("no " + stem + ".csv or " + stem + ".bin in '" + dir + "'");
}

std::string error_histogram_svg(const ExperimentResult& r) {
  long long max_bin = 0;
  for (const auto& [bin, n] : r.baseline.error_histogram) max_bin = std::max(max_bin, bin);
  for (const auto& [bin, n] : r.augmented.error_histogram) max_bin = std::max(max_bin, bin);
  std::vector<std::string> cats;
  BarSeries base{"baseline", {}};
  BarSeries aug{"augmented", {}};
  for (long long bin = 0; bin <= max_bin; ++bin) {
    cats.push_back(dtos(static_cast<double>(bin) * r.baseline.bin_width));
    const auto b = r.baseline.error_histogram.find(bin);
    base.values.push_back(b == r.baseline.error_histogram.end()
                              ? 0.0
                              : static_cast<double>(b->second));
    const auto a = r.augmented.error_histogram.find(bin);
    aug.values.push_back(a == r.augmented.error_histogram.end()
                             ? 0.0
                             : static_cast<double>(a->second));
  }
  return bar_chart_svg("absolute error distribution", cats, {base, aug});
}

std::string rare_f1_svg(const std::vector<ExperimentResult>& results) {
  std::vector<std::string> cats;
  BarSeries base{"baseline", {}};
  BarSeries aug{"augmented", {}};
  for (int label : results.front().rare_labels) {
    cats.push_back(std::to_string(label));
    std::vector<double> b, a;
    for (const ExperimentResult& r : results) {
      const auto it = std::find_if(r.rare.begin(), r.rare.end(),
                                   [&](const RareClassDelta& d) { return d.label == label; });
      b.push_back(it->f1_baseline);
      a.push_back(it->f1_augmented);
    }
    base.values.push_back(median(b));
    aug.values.push_back(median(a));
  }
  return bar_chart_svg("rare-class f1 (median over seeds)", cats, {base, aug});
}

// ---------------------------------------------------------------------------
// Gradient checking

// A complete two-sided objective instance on a small randomly-sized model.
struct CheckProblem {
  TrainConfig cfg;
  ModelBundle bundle;
  ContextInterval c{1};
  int s_x = 10;
  int s_y = 11;
  Tensor f_x, f_y;
  Tensor z_xy, z_back_x, z_yx, z_back_y;
  Tensor fake_y0, fake_x0;  // generator outputs at the current parameters
  Tensor f_hat_x, f_hat_y;  // fixed interpolation points
  LossWeights weights;
};

CheckProblem make_check_problem(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.feature_dim = 3 + seed % 5;
  cfg.noise_dim = 2 + seed % 3;
  cfg.hidden_generator = 4 + (seed / 2) % 5;
  cfg.hidden_critic = 4 + (seed / 3) % 5;
  cfg.batch_size = 2;
  RngStream init(seed, "init");
  CheckProblem p{cfg, make_bundle(cfg, {10, 11, 12}, init)};
  const std::size_t n = 2;
  RngStream data(seed, "data");
  p.f_x = Tensor::zeros({n, cfg.feature_dim});
  for (double& v : p.f_x.data) v = data.uniform(0.2, 1.5);
  p.f_y = Tensor::zeros({n, cfg.feature_dim});
  for (double& v : p.f_y.data) v = data.uniform(0.2, 1.5);
  RngStream noise(seed, "noise");
  p.z_xy = noise.gaussian_tensor({n, cfg.noise_dim});
  p.z_back_x = noise.gaussian_tensor({n, cfg.noise_dim});
  p.z_yx = noise.gaussian_tensor({n, cfg.noise_dim});
  p.z_back_y = noise.gaussian_tensor({n, cfg.noise_dim});
  p.fake_y0 = generator_forward(p.bundle.params, p.bundle.gen_xy, p.bundle.embedding, p.c,
                                p.f_x, p.z_xy);
  p.fake_x0 = generator_forward(p.bundle.params, p.bundle.gen_yx, p.bundle.embedding,
                                reverse(p.c), p.f_y, p.z_yx);
  RngStream alpha(seed, "alpha");
  p.f_hat_y = interpolate_batch(p.f_y, p.fake_y0, alpha);
  p.f_hat_x = interpolate_batch(p.f_x, p.fake_x0, alpha);
  return p;
}

// A parameter nudge of eps=1e-5 must not flip any activation branch, so
// draws whose pre-activations sit close to a kink are rejected.
bool kink_free(const Graph& g, NodeId root, double margin = 1e-3) {
  for (NodeId id : g.ancestors(root)) {
    const Value& v = g.node(id);
    if (v.op == OpKind::Relu || v.op == OpKind::LeakyRelu) {
      for (double pre : g.node(v.parents[0]).payload.data) {
        if (std::fabs(pre) <= margin) return false;
      }
    }
    if (v.op == OpKind::RowL2Norm) {
      for (double norm : g.payload(id).data) {
        if (norm <= margin) return false;
      }
    }
  }
  return true;
}

// The penalty's activation mask is sampled outside the graph; its inputs
// must clear the margin too.
bool masks_clear(const CheckProblem& p, double margin = 1e-3) {
  for (const auto& [critic, c, f_hat] :
       {std::tuple<const CriticSpec*, ContextInterval, const Tensor*>{&p.bundle.critic_y,
                                                                      p.c, &p.f_hat_y},
        std::tuple<const CriticSpec*, ContextInterval, const Tensor*>{
            &p.bundle.critic_x, reverse(p.c), &p.f_hat_x}}) {
    const Tensor pre =
        critic_preactivation(p.bundle.params, *critic, p.bundle.embedding, c, *f_hat);
    for (double v : pre.data) {
      if (std::fabs(v) <= margin) return false;
    }
  }
  return true;
}

struct TermSpec {
  const char* name;
  bool uses_penalty;
  std::function<NodeId(Graph&, const CheckProblem&)> build;
};

std::vector<TermSpec> check_terms() {
  const auto fakes = [](Graph& g, const CheckProblem& p) {
    const NodeId fake_y =
        generator_forward_node(g, p.bundle.gen_xy, p.bundle.embedding, p.c,
                               g.constant(p.f_x), g.constant(p.z_xy));
    const NodeId fake_x =
        generator_forward_node(g, p.bundle.gen_yx, p.bundle.embedding, reverse(p.c),
                               g.constant(p.f_y), g.constant(p.z_yx));
    return std::pair<NodeId, NodeId>{fake_y, fake_x};
  };
  return {
      {"adversarial", false,
       [fakes](Graph& g, const CheckProblem& p) {
         const auto [fake_y, fake_x] = fakes(g, p);
         return g.add(generator_adversarial_node(g, p.bundle.critic_y, p.bundle.embedding,
                                                 p.c, fake_y),
                      generator_adversarial_node(g, p.bundle.critic_x, p.bundle.embedding,
                                                 reverse(p.c), fake_x));
       }},
      {"classification", false,
       [fakes](Graph& g, const CheckProblem& p) {
         const auto [fake_y, fake_x] = fakes(g, p);
         return g.add(classification_loss_node(g, p.bundle.classifier, fake_y, p.s_y),
                      classification_loss_node(g, p.bundle.classifier, fake_x, p.s_x));
       }},
      {"cycle-reconstruction", false,
       [](Graph& g, const CheckProblem& p) {
         return cycle_loss_node(g, p.bundle.gen_xy, p.bundle.gen_yx, p.bundle.embedding,
                                p.c, g.constant(p.f_x), g.constant(p.z_xy),
                                g.constant(p.z_back_x), g.constant(p.f_y),
                                g.constant(p.z_yx), g.constant(p.z_back_y));
       }},
      {"critic-with-penalty", true,
       [](Graph& g, const CheckProblem& p) {
         const CriticObjectiveNodes y =
             critic_objective_nodes(g, p.bundle.critic_y, p.bundle.embedding, p.c, p.f_y,
                                    p.fake_y0, p.f_hat_y, p.weights);
         const CriticObjectiveNodes x = critic_objective_nodes(
             g, p.bundle.critic_x, p.bundle.embedding, reverse(p.c), p.f_x, p.fake_x0,
             p.f_hat_x, p.weights);
         return g.add(y.objective, x.objective);
       }},
      {"full-composite", true,
       [](Graph& g, const CheckProblem& p) {
         return full_objective_nodes(g, p.bundle, p.c, p.f_x, p.f_y, p.z_xy, p.z_back_x,
                                     p.z_yx, p.z_back_y, p.f_hat_x, p.f_hat_y, p.s_x,
                                     p.s_y, p.weights)
             .total;
       }},
  };
}

}  // namespace

std::vector<GradCheckRow> gradcheck_rows(std::uint64_t first_seed, std::size_t trials) {
  if (trials == 0) throw ValidationError("gradcheck needs at least one trial");
  std::vector<GradCheckRow> rows;
  for (const TermSpec& term : check_terms()) {
    GradCheckRow row{term.name, 0.0, 0};
    std::uint64_t seed = first_seed;
    std::size_t attempts = 0;
    while (row.points < trials) {
      if (++attempts > trials * 50) {
        throw NumericError(std::string("gradcheck: could not find enough kink-free draws for ") +
                           term.name);
      }
      CheckProblem p = make_check_problem(seed++);
      Graph g(&p.bundle.params);
      const NodeId root = term.build(g, p);
      g.forward(root);
      if (!kink_free(g, root)) continue;
      if (term.uses_penalty && !masks_clear(p)) continue;

      const GradMap analytic = g.backward(root);
      const GradMap numeric = finite_diff_grad(
          [&]() {
            Graph fg(&p.bundle.params);
            return fg.forward(term.build(fg, p)).value();
          },
          p.bundle.params, 1e-5);
      // Floor differences at twice the cancellation noise of central
      // differences so exactly-zero gradients are not compared to rounding
      // residue.
      const GradCheckReport rep = compare_gradients(analytic, numeric, 2e-9);
      row.max_rel_error = std::max(row.max_rel_error, rep.max_rel_error);
      ++row.points;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string gradcheck_table(const std::vector<GradCheckRow>& rows, double tolerance) {
  std::string out = "term                  points  max-rel-error  status\n";
  char buf[128];
  bool all_ok = true;
  for (const GradCheckRow& r : rows) {
    const bool ok = r.max_rel_error <= tolerance;
    all_ok = all_ok && ok;
    std::snprintf(buf, sizeof(buf), "%-22s %5zu %14.3e  %s\n", r.term.c_str(), r.points,
                  r.max_rel_error, ok ? "ok" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "tolerance %.0e: %s\n", tolerance,
                all_ok ? "PASS" : "FAIL");
  out += buf;
  return out;
}

std::string inspect_checkpoint_text(const std::string& dir) {
  const ManifestInfo info = read_manifest(dir);
  std::ostringstream out;
  out << "checkpoint: " << dir << "\n";
  out << "format_version: " << info.format_version << "\n";
  out << "labels:";
  for (int label : info.labels) out << ' ' << label;
  out << " (" << info.labels.size() << " classes)\n";
  std::size_t trainable = 0;
  for (const bool t : info.param_trainable) trainable += t ? 1 : 0;
  out << "parameters: " << info.param_names.size() << " tensors, " << info.total_values
      << " values, " << trainable << " trainable tensors\n";

  const std::string state_path = dir + "/" + kStateFile;
  if (fs::exists(state_path)) {
    const nlohmann::json s = nlohmann::json::parse(read_text_file(state_path));
    out << "training_state: epochs_done=" << s.value("epochs_done", 0ULL)
        << " generator_steps=" << s.value("generator_steps", 0ULL)
        << " critic_steps=" << s.value("critic_steps", 0ULL) << "\n";
  } else {
    out << "training_state: none\n";
  }

  out << "config:\n";
  const nlohmann::json cfg = nlohmann::json::parse(config_to_json(info.config));
  for (const auto& [key, value] : cfg.items()) {
    out << "  " << key << ": "
        << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
  }

  out << "parameter table:\n";
  for (std::size_t i = 0; i < info.param_names.size(); ++i) {
    out << "  " << info.param_names[i] << " [";
    for (std::size_t d = 0; d < info.param_shapes[i].size(); ++d) {
      if (d) out << 'x';
      out << info.param_shapes[i][d];
    }
    out << "] " << (info.param_trainable[i] ? "trainable" : "frozen") << "\n";
  }
  return out.str();
}

namespace {

// ---------------------------------------------------------------------------
// Subcommand bodies. Each validates its inputs fully before creating output
// files, then closes its RunWriter with the run manifest.

int cmd_gen_data(const GlobalOpts& g, const std::string& spec_path) {
  SyntheticSpec spec =
      spec_path.empty() ? default_benchmark_spec() : spec_from_json(read_text_file(spec_path));
  if (g.seed_set) spec.seed = g.seed;
  spec.validate();
  const FileFormat fmt = g.format.empty() ? FileFormat::Csv : file_format_from_name(g.format);

  log_info("gen-data: building the synthetic benchmark");
  const SyntheticBenchmark bench = make_synthetic_benchmark(spec);
  log_info("gen-data: " + std::to_string(bench.train.size()) + " train / " +
           std::to_string(bench.test.size()) + " test records");

  RunWriter run(g.out);
  const std::string ext = extension_for(fmt);
  save_features(bench.train, run.path("train." + ext), fmt);
  run.record("train." + ext);
  save_features(bench.test, run.path("test." + ext), fmt);
  run.record("test." + ext);
  run.write("prototypes.csv", prototypes_csv(bench));
  const std::string resolved = spec_to_json(bench.spec);
  run.write("spec.json", resolved);

  std::vector<std::string> inputs;
  if (!spec_path.empty()) inputs.push_back(spec_path);
  run.finish("gen-data", g.cmdline, nlohmann::json::parse(resolved), spec.seed, inputs);
  return 0;
}

int cmd_train_classifier(const GlobalOpts& g, const std::string& data_path) {
  const Dataset data = load_features(data_path, format_for(data_path, g.format));
  const TrainConfig cfg = resolve_config(g, &data);

  const ClassifierResult cls = pretrain_classifier(data, cfg);
  log_info("train-classifier: training accuracy " + dtos(cls.train_accuracy));
  const MetricsReport report = compute_metrics(predict_dataset(cls, data));

  RngStream init(cfg.seed, "init");
  ModelBundle bundle = make_bundle(cfg, cls.spec.labels, init);
  install_classifier(bundle, cls);

  RunWriter run(g.out);
  save_checkpoint(run.path("checkpoint"), cfg, bundle, nullptr);
  run.record("checkpoint/" + std::string(kManifestFile));
  run.record("checkpoint/" + std::string(kWeightsFile));
  run.write("train_metrics.json", metrics_to_json(report));
  run.write("classifier_losses.csv", epoch_losses_csv(cls.epoch_losses));
  run.finish("train-classifier", g.cmdline, nlohmann::json::parse(config_to_json(cfg)),
             cfg.seed, {data_path});
  return 0;
}

int cmd_train_gan(const GlobalOpts& g, const std::string& data_path,
                  const std::string& resume_dir, std::uint64_t halt_steps) {
  const Dataset data = load_features(data_path, format_for(data_path, g.format));

  TrainConfig cfg;
  GanResult result;
  std::vector<std::string> inputs = {data_path};
  if (!resume_dir.empty()) {
    if (g.seed_set || !g.config.empty()) {
      throw ValidationError(
          "--resume continues with the checkpoint's config; --config/--seed are not allowed");
    }
    const Checkpoint ckpt = load_checkpoint(resume_dir);
    cfg = ckpt.config;
    inputs.push_back(resume_dir);
    log_info("train-gan: resuming at generator step " +
             std::to_string(ckpt.state.generator_steps));
    result = continue_gan(ckpt, data, halt_steps);
  } else {
    cfg = resolve_config(g, &data);
    log_info("train-gan: pretraining the classifier");
    const ClassifierResult cls = pretrain_classifier(data, cfg);
    log_info("train-gan: classifier training accuracy " + dtos(cls.train_accuracy));
    result = train_gan(data, cls, cfg, halt_steps);
  }
  log_info("train-gan: " + std::to_string(result.state.generator_steps) +
           " generator steps done");

  RunWriter run(g.out);
  save_checkpoint(run.path("checkpoint"), cfg, result.bundle, &result.state);
  run.record("checkpoint/" + std::string(kManifestFile));
  run.record("checkpoint/" + std::string(kWeightsFile));
  run.record("checkpoint/" + std::string(kStateFile));
  run.write("losses.csv", losses_csv(result.history));
  run.finish("train-gan", g.cmdline, nlohmann::json::parse(config_to_json(cfg)), cfg.seed,
             inputs);
  return 0;
}

int cmd_synthesize(const GlobalOpts& g, const std::string& ckpt_dir,
                   const std::string& data_path, int label, std::size_t count) {
  const Checkpoint ckpt = load_checkpoint(ckpt_dir);
  const Dataset data = load_features(data_path, format_for(data_path, g.format));
  const std::uint64_t seed = g.seed_set ? g.seed : ckpt.config.seed;

  RngStream rng(seed, "synth");
  const std::vector<FeatureRecord> records =
      synthesize_features(ckpt.bundle, data, label, count, rng);
  const Dataset synth = make_dataset(records, data.d_f);

  const FileFormat fmt = g.format.empty() ? FileFormat::Csv : file_format_from_name(g.format);
  RunWriter run(g.out);
  const std::string name = std::string("synthetic.") + extension_for(fmt);
  save_features(synth, run.path(name), fmt);
  run.record(name);
  run.finish("synthesize", g.cmdline, nlohmann::json::parse(config_to_json(ckpt.config)),
             seed, {ckpt_dir, data_path});
  return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& ckpt_dir,
                 const std::string& data_path, double bin_width) {
  const Checkpoint ckpt = load_checkpoint(ckpt_dir);
  const Dataset test = load_features(data_path, format_for(data_path, g.format));
  if (test.d_f != ckpt.bundle.classifier.d_f) {
    throw ValidationError("test set width " + std::to_string(test.d_f) +
                          " does not match the classifier (" +
                          std::to_string(ckpt.bundle.classifier.d_f) + ")");
  }

  const ClassifierResult cls = classifier_from_bundle(ckpt.bundle);
  const MetricsReport report = compute_metrics(predict_dataset(cls, test), bin_width);
  log_info("evaluate: mae " + dtos(report.mae) + ", macro f1 " + dtos(report.macro_f1));

  RunWriter run(g.out);
  run.write("metrics.json", metrics_to_json(report));
  run.write("per_class.csv", metrics_per_class_csv(report));
  run.write("error_histogram.csv", histogram_csv(report.error_histogram, report.bin_width));
  run.finish("evaluate", g.cmdline, nlohmann::json::parse(config_to_json(ckpt.config)),
             ckpt.config.seed, {ckpt_dir, data_path});
  return 0;
}

int cmd_augment_eval(const GlobalOpts& g, const std::string& data_dir,
                     const std::vector<int>& rare, std::vector<std::uint64_t> seeds,
                     std::size_t synth_per_class) {
  const auto [train_path, train_fmt] = find_split(data_dir, "train", g.format);
  const auto [test_path, test_fmt] = find_split(data_dir, "test", g.format);
  const Dataset train = load_features(train_path, train_fmt);
  const Dataset test = load_features(test_path, test_fmt);
  const TrainConfig base_cfg = resolve_config(g, &train);

  // Fail on bad inputs before the output directory is created.
  if (test.size() == 0) throw ValidationError("experiment needs a non-empty test set");
  const std::vector<int> train_labels = train.label_set();
  for (int label : rare) {
    if (!std::binary_search(train_labels.begin(), train_labels.end(), label)) {
      throw ValidationError("rare label " + std::to_string(label) +
                            " has no training samples");
    }
  }

  if (seeds.empty()) seeds.push_back(base_cfg.seed);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  RunWriter run(g.out);
  std::vector<ExperimentResult> results;
  nlohmann::json per_seed = nlohmann::json::array();
  for (const std::uint64_t seed : seeds) {
    log_info("augment-eval: seed " + std::to_string(seed));
    TrainConfig cfg = base_cfg;
    cfg.seed = seed;
    ExperimentResult r = augmentation_experiment(train, test, rare, cfg, synth_per_class);

    const std::string dir = "seed-" + std::to_string(seed);
    run.write(dir + "/experiment.json", experiment_to_json(r));
    run.write(dir + "/rare_class_table.csv", experiment_table_csv(r));
    run.write(dir + "/baseline_error_histogram.csv",
              histogram_csv(r.baseline.error_histogram, r.baseline.bin_width));
    run.write(dir + "/augmented_error_histogram.csv",
              histogram_csv(r.augmented.error_histogram, r.augmented.bin_width));
    run.write(dir + "/error_histogram.svg", error_histogram_svg(r));

    per_seed.push_back({{"seed", seed},
                        {"rare_macro_f1_baseline", rare_macro_f1(r.baseline, r.rare_labels)},
                        {"rare_macro_f1_augmented", rare_macro_f1(r.augmented, r.rare_labels)},
                        {"mae_baseline", r.baseline.mae},
                        {"mae_augmented", r.augmented.mae},
                        {"rmse_baseline", r.baseline.rmse},
                        {"rmse_augmented", r.augmented.rmse},
                        {"macro_f1_baseline", r.baseline.macro_f1},
                        {"macro_f1_augmented", r.augmented.macro_f1}});
    results.push_back(std::move(r));
  }

  const auto med = [&](const std::function<double(const ExperimentResult&)>& get) {
    std::vector<double> v;
    v.reserve(results.size());
    for (const ExperimentResult& r : results) v.push_back(get(r));
    return median(v);
  };
  nlohmann::json summary;
  summary["seeds"] = seeds;
  summary["synth_per_class"] = synth_per_class;
  summary["rare_labels"] = results.front().rare_labels;
  summary["per_seed"] = std::move(per_seed);
  summary["median"] = {
      {"rare_macro_f1_baseline",
       med([](const ExperimentResult& r) { return rare_macro_f1(r.baseline, r.rare_labels); })},
      {"rare_macro_f1_augmented",
       med([](const ExperimentResult& r) { return rare_macro_f1(r.augmented, r.rare_labels); })},
      {"mae_baseline", med([](const ExperimentResult& r) { return r.baseline.mae; })},
      {"mae_augmented", med([](const ExperimentResult& r) { return r.augmented.mae; })},
      {"rmse_baseline", med([](const ExperimentResult& r) { return r.baseline.rmse; })},
      {"rmse_augmented", med([](const ExperimentResult& r) { return r.augmented.rmse; })},
      {"macro_f1_baseline", med([](const ExperimentResult& r) { return r.baseline.macro_f1; })},
      {"macro_f1_augmented",
       med([](const ExperimentResult& r) { return r.augmented.macro_f1; })},
  };
  run.write("summary.json", summary.dump(2) + "\n");
  run.write("rare_f1.svg", rare_f1_svg(results));
  run.finish("augment-eval", g.cmdline, nlohmann::json::parse(config_to_json(base_cfg)),
             base_cfg.seed, {train_path, test_path});
  return 0;
}

int cmd_gradcheck(const GlobalOpts& g, std::size_t trials) {
  const std::uint64_t first_seed = g.seed_set ? g.seed : 1;
  const std::vector<GradCheckRow> rows = gradcheck_rows(first_seed, trials);
  const std::string table = gradcheck_table(rows, kGradTolerance);
  std::cout << table;
  bool all_ok = true;
  for (const GradCheckRow& r : rows) all_ok = all_ok && r.max_rel_error <= kGradTolerance;

  if (!g.out.empty()) {
    RunWriter run(g.out);
    run.write("gradcheck.txt", table);
    run.finish("gradcheck", g.cmdline,
               {{"first_seed", first_seed}, {"trials", trials}}, first_seed, {});
  }
  return all_ok ? 0 : 1;
}

int cmd_inspect(const std::string& ckpt_dir) {
  std::cout << inspect_checkpoint_text(ckpt_dir);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"feature-space augmentation pipeline for imbalanced intensity classes"};
  app.require_subcommand(1);

  GlobalOpts g;
  for (int i = 0; i < argc; ++i) {
    if (i) g.cmdline += ' ';
    g.cmdline += argv[i];
  }

  auto* seed_opt = app.add_option("--seed", g.seed, "Override the configured RNG seed");
  app.add_option("--out", g.out, "Output directory for artifacts and the run manifest");
  app.add_option("--config", g.config, "Training configuration JSON file");
  app.add_option("--format", g.format, "Feature file format")
      ->check(CLI::IsMember({"csv", "binary"}));
  app.add_flag("--quiet", g.quiet, "Log errors only");
  app.set_version_flag("--version", std::string("cafv ") + kToolVersion);

  int rc = 0;
  const auto dispatch = [&](std::function<int()> body) {
    return [&g, seed_opt, &rc, body = std::move(body)] {
      g.seed_set = seed_opt->count() > 0;
      if (g.quiet) set_log_level(LogLevel::Error);
      rc = body();
    };
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic benchmark dataset");
  gen->fallthrough();
  std::string gen_spec;
  gen->add_option("--spec", gen_spec,
                  "Benchmark spec JSON (defaults to the built-in imbalance profile)");
  gen->callback(dispatch([&] { return cmd_gen_data(g, gen_spec); }));

  auto* tc = app.add_subcommand("train-classifier",
                                "Train the intensity classifier on real features");
  tc->fallthrough();
  std::string tc_data;
  tc->add_option("--data", tc_data, "Training feature file")->required();
  tc->callback(dispatch([&] { return cmd_train_classifier(g, tc_data); }));

  auto* tg = app.add_subcommand("train-gan",
                                "Train the translation networks against a pretrained classifier");
  tg->fallthrough();
  std::string tg_data, tg_resume;
  std::uint64_t tg_halt = 0;
  tg->add_option("--data", tg_data, "Training feature file")->required();
  tg->add_option("--resume", tg_resume, "Checkpoint directory to continue from");
  tg->add_option("--halt-steps", tg_halt,
                 "Stop after this absolute generator step (0 = run to completion)");
  tg->callback(dispatch([&] { return cmd_train_gan(g, tg_data, tg_resume, tg_halt); }));

  auto* sy = app.add_subcommand("synthesize", "Synthesize feature vectors for one class");
  sy->fallthrough();
  std::string sy_ckpt, sy_data;
  int sy_label = 0;
  std::size_t sy_count = 0;
  sy->add_option("--checkpoint", sy_ckpt, "Trained checkpoint directory")->required();
  sy->add_option("--data", sy_data, "Feature file providing source samples")->required();
  sy->add_option("--label", sy_label, "Target class label")->required();
  sy->add_option("--count", sy_count, "Number of records to synthesize")->required();
  sy->callback(dispatch([&] { return cmd_synthesize(g, sy_ckpt, sy_data, sy_label, sy_count); }));

  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint's classifier on a feature file");
  ev->fallthrough();
  std::string ev_ckpt, ev_data;
  double ev_bin = 1.0;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint directory")->required();
  ev->add_option("--data", ev_data, "Test feature file")->required();
  ev->add_option("--bin-width", ev_bin, "Absolute-error histogram bin width");
  ev->callback(dispatch([&] { return cmd_evaluate(g, ev_ckpt, ev_data, ev_bin); }));

  auto* ae = app.add_subcommand(
      "augment-eval", "Compare baseline and augmentation-retrained classifiers over seeds");
  ae->fallthrough();
  std::string ae_data;
  std::vector<int> ae_rare;
  std::vector<std::uint64_t> ae_seeds;
  std::size_t ae_synth = 200;
  ae->add_option("--data", ae_data, "Directory holding train/test feature files")->required();
  ae->add_option("--rare", ae_rare, "Rare class labels")->required()->delimiter(',');
  ae->add_option("--seeds", ae_seeds, "Seeds to fan out over (default: the config seed)")
      ->delimiter(',');
  ae->add_option("--synth", ae_synth, "Synthetic records per rare class");
  ae->callback(dispatch([&] { return cmd_augment_eval(g, ae_data, ae_rare, ae_seeds, ae_synth); }));

  auto* gc = app.add_subcommand("gradcheck",
                                "Verify objective gradients against finite differences");
  gc->fallthrough();
  std::size_t gc_trials = 20;
  gc->add_option("--trials", gc_trials, "Kink-free draws per objective term");
  gc->callback(dispatch([&] { return cmd_gradcheck(g, gc_trials); }));

  auto* ic = app.add_subcommand("inspect-checkpoint",
                                "Print a checkpoint summary from its manifest");
  ic->fallthrough();
  std::string ic_dir;
  ic->add_option("checkpoint", ic_dir, "Checkpoint directory")->required();
  ic->callback(dispatch([&] { return cmd_inspect(ic_dir); }));

  try {
    app.parse(argc, argv);
    return rc;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help to stdout or usage errors to stderr
    return code == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    log_error(e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    log_error(std::string("malformed JSON input: ") + e.what());
    return 1;
  } catch (const NumericError& e) {
    log_error(e.what());
    return 2;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 2;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("cafv");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cafv::cli
