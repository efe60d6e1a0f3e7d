#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mvp/dataset.hpp"
#include "mvp/errors.hpp"
#include "mvp/evaluation.hpp"
#include "mvp/gradcheck.hpp"
#include "mvp/trainer.hpp"

namespace mvp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Turns `--config file.json` on a subcommand into extra command-line
// arguments for every key whose flag was not given explicitly. Keys are long
// flag names with '-' or '_' separators.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  if (args.empty()) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args.front());
  if (sub == nullptr) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CLI::ConversionError(path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError(path + " must hold a JSON object");

  const auto given = [&](const std::string& flag) {
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  const auto scalar = [&](const std::string& key, const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config key '" + key + "' must be a string, number, boolean or array of those");
  };

  std::vector<std::string> out(args.begin(), args.end());
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || flag == "--config") {
      throw CLI::ExtrasError(path + ": unknown key '" + key + "' for " + sub->get_name(), CLI::ExitCodes::ExtrasError);
    }
    if (given(flag)) continue;
    if (opt->get_expected_max() == 0) {
      if (!value.is_boolean()) throw CLI::ConversionError("config key '" + key + "' must be a boolean");
      if (value.get<bool>()) out.push_back(flag);
      continue;
    }
    if (value.is_array()) {
      if (value.empty()) continue;
      out.push_back(flag);
      for (const auto& e : value) out.push_back(scalar(key, e));
    } else {
      out.push_back(flag);
      out.push_back(scalar(key, value));
    }
  }
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_of(const json& j) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
  return ss.str();
}

struct Manifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::object();
  std::string started;
};

void write_manifest(const Manifest& m, const fs::path& path) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config_digest"] = digest_of(m.config);
  j["seed"] = m.seed;
  j["started_at"] = m.started;
  j["finished_at"] = utc_now();
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["config"] = m.config;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

fs::path sidecar(const fs::path& file, const std::string& suffix) {
  return fs::path(file.string() + suffix);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_json_file(const nlohmann::ordered_json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

// Loads the dataset directory and attaches the fingerprint's masks.
struct Inputs {
  MultiViewDataset data;
  Fingerprint fp;
};

Inputs load_inputs(const fs::path& data_dir, const fs::path& fp_path, std::optional<double> eta,
                   std::ostream& err) {
  MultiViewDataset data = load_dataset_dir(data_dir);
  Fingerprint fp = read_fingerprint(fp_path);
  require(fp.views == data.views(), "fingerprint covers " + std::to_string(fp.views) + " views, dataset has " +
                                        std::to_string(data.views()));
  require(static_cast<Index>(fp.records.size()) == data.size(),
          "fingerprint has " + std::to_string(fp.records.size()) + " records, dataset has " +
              std::to_string(data.size()) + " samples");
  resolve_eta(fp, eta, err);
  data.set_masks(fp.masks());
  return {std::move(data), std::move(fp)};
}

// ---------------------------------------------------------------- gen-data

struct GenDataOptions {
  Index n = 600;
  int clusters = 3;
  int views = 3;
  std::vector<Index> dims{10};
  double noise = 0.1;
  std::uint64_t seed = 0;
  Index shared_dim = 4;
  double centroid_scale = 2.0;
  double jitter = 0.35;
  bool zscore = false;
  std::string out;
};

void add_gen_data(CLI::App& app, GenDataOptions& o) {
  app.add_option("--n", o.n, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--clusters", o.clusters, "Number of clusters")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--views", o.views, "Number of views (>= 2)")->capture_default_str()->check(CLI::Range(2, 1024));
  app.add_option("--dims", o.dims, "Feature count per view (one value applies to all views)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--noise", o.noise, "Observation noise sd")->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--shared-dim", o.shared_dim, "Dimension of the shared latent")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--centroid-scale", o.centroid_scale, "Sd of cluster centroids")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--jitter", o.jitter, "Sd of samples around their centroid")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--zscore", o.zscore, "Mark the dataset for per-feature standardization on load");
  app.add_option("--out", o.out, "Output directory")->required();
}

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
  const std::string started = utc_now();
  SyntheticConfig c;
  c.n = o.n;
  c.clusters = o.clusters;
  c.views = o.views;
  if (o.dims.size() == 1) {
    c.view_dims.assign(static_cast<std::size_t>(o.views), o.dims.front());
  } else {
    require(static_cast<int>(o.dims.size()) == o.views,
            "--dims lists " + std::to_string(o.dims.size()) + " values for " + std::to_string(o.views) + " views");
    c.view_dims = o.dims;
  }
  c.noise_sigma = o.noise;
  c.seed = o.seed;
  c.shared_dim = o.shared_dim;
  c.centroid_scale = o.centroid_scale;
  c.jitter = o.jitter;

  const MultiViewDataset data = gen_synthetic(c);
  const fs::path dir(o.out);
  save_dataset_dir(data, dir);
  if (o.zscore) {
    nlohmann::ordered_json od;
    {
      std::ifstream in(dir / "dataset.json");
      od = nlohmann::ordered_json::parse(in);
    }
    od["zscore"] = true;
    write_json_file(od, dir / "dataset.json");
  }

  Manifest m;
  m.command = "gen-data";
  m.config = json{{"n", o.n},         {"clusters", o.clusters}, {"views", o.views},
                  {"dims", c.view_dims}, {"noise", o.noise},   {"seed", o.seed},
                  {"shared_dim", o.shared_dim}, {"centroid_scale", o.centroid_scale},
                  {"jitter", o.jitter}, {"zscore", o.zscore}};
  m.seed = o.seed;
  m.started = started;
  m.outputs = json{{"dir", dir.string()}};
  write_manifest(m, dir / "manifest.json");
  out << "wrote " << data.size() << " samples x " << data.views() << " views to " << dir.string() << '\n';
  return kOk;
}

// --------------------------------------------------------------- gen-masks

struct GenMasksOptions {
  std::string data;
  double eta = 0.5;
  std::uint64_t seed = 0;
  int pool = kDefaultPoolSize;
  std::string out;
};

void add_gen_masks(CLI::App& app, GenMasksOptions& o) {
  app.add_option("--data", o.data, "Dataset directory")->required();
  app.add_option("--eta", o.eta, "Missing rate in [0, 1]")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--pool", o.pool, "Permutation bundles stored per sample")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Fingerprint file (JSON lines)")->required();
}

int cmd_gen_masks(const GenMasksOptions& o, std::ostream& out) {
  const std::string started = utc_now();
  const MultiViewDataset data = load_dataset_dir(o.data);
  const MaskMatrix masks = gen_masks(data.size(), data.views(), o.eta, o.seed);
  const Fingerprint fp = build_fingerprint(masks, o.seed, o.eta, o.pool);
  write_fingerprint(fp, fs::path(o.out));

  std::size_t incomplete = 0;
  for (const auto& m : masks) incomplete += std::find(m.begin(), m.end(), 0) != m.end() ? 1 : 0;
  Manifest man;
  man.command = "gen-masks";
  man.config = json{{"eta", o.eta}, {"seed", o.seed}, {"pool", o.pool}};
  man.seed = o.seed;
  man.started = started;
  man.inputs = json{{"data", o.data}};
  man.outputs = json{{"fingerprint", o.out}};
  write_manifest(man, sidecar(o.out, ".manifest.json"));
  out << "wrote fingerprint for " << masks.size() << " samples (" << incomplete << " incomplete) to " << o.out
      << '\n';
  return kOk;
}

// ------------------------------------------------------------ train/ablate

struct TrainOptions {
  std::string data;
  std::string fingerprint;
  std::optional<double> eta;
  Index d = 16;
  std::optional<Index> k;
  double beta_z = 5.0;
  double beta_omega = 2.5;
  int warmup = 100;
  int epochs = 300;
  int batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string prior_mode = "cyclic";
  bool beta_in_warmup = true;
  std::vector<Index> encoder_hidden = Architecture{}.encoder_hidden;
  std::vector<Index> corr_hidden = Architecture{}.correspondence_hidden;
  std::vector<Index> decoder_hidden = Architecture{}.decoder_hidden;
};

void add_train_options(CLI::App& app, TrainOptions& o, bool with_prior_mode) {
  app.add_option("--data", o.data, "Dataset directory")->required();
  app.add_option("--fingerprint", o.fingerprint, "Fingerprint file")->required();
  app.add_option("--eta", o.eta, "Expected missing rate (the fingerprint header wins)");
  app.add_option("--d", o.d, "Latent dimension")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--k", o.k, "Shared dimension (default: d)")->check(CLI::PositiveNumber);
  app.add_option("--beta-z", o.beta_z, "Weight of the z regularizer")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--beta-omega", o.beta_omega, "Weight of the omega regularizer")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--warmup", o.warmup, "Warm-up epochs on the self-view bound")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--epochs", o.epochs, "Total epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--batch", o.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--lr", o.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  if (with_prior_mode) {
    app.add_option("--prior-mode", o.prior_mode, "cyclic, standard_normal, fusion, diagonal or random_perm")
        ->capture_default_str()
        ->check(CLI::IsMember({"cyclic", "standard_normal", "fusion", "diagonal", "random_perm"}));
  }
  app.add_option("--beta-in-warmup", o.beta_in_warmup, "Apply the beta weights during warm-up")
      ->capture_default_str();
  app.add_option("--encoder-hidden", o.encoder_hidden, "Encoder hidden widths")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--corr-hidden", o.corr_hidden, "Correspondence hidden widths")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--decoder-hidden", o.decoder_hidden, "Decoder hidden widths")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

TrainConfig to_config(const TrainOptions& o) {
  TrainConfig c;
  c.d = o.d;
  c.k = o.k.value_or(o.d);
  c.beta_z = o.beta_z;
  c.beta_omega = o.beta_omega;
  c.warmup_epochs = o.warmup;
  c.epochs = o.epochs;
  c.batch_size = o.batch;
  c.lr = o.lr;
  c.seed = o.seed;
  c.prior_mode = parse_prior_mode(o.prior_mode);
  c.beta_in_warmup = o.beta_in_warmup;
  c.arch.encoder_hidden = o.encoder_hidden;
  c.arch.correspondence_hidden = o.corr_hidden;
  c.arch.decoder_hidden = o.decoder_hidden;
  c.validate();
  return c;
}

struct TrainCmdOptions {
  TrainOptions train;
  std::string out;
  std::string log;
  bool quiet = false;
};

int cmd_train(const TrainCmdOptions& o, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  const TrainConfig config = to_config(o.train);
  Inputs in = load_inputs(o.train.data, o.train.fingerprint, o.train.eta, err);
  const fs::path log_path = o.log.empty() ? sidecar(o.out, ".log.jsonl") : fs::path(o.log);
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot write training log: " + log_path.string());

  const TrainResult result = train(in.data, in.fp, config, [&](const EpochLog& e) {
    log << epoch_log_json(e) << '\n';
    log.flush();
    if (!o.quiet && (e.epoch % 10 == 0 || e.epoch + 1 == config.epochs)) {
      out << "epoch " << e.epoch << " [" << e.phase << "] recon " << e.recon << " kl_z " << e.kl_z << " kl_omega "
          << e.kl_omega << " total " << e.total << '\n';
    }
  });
  save_checkpoint(result.params, config, fs::path(o.out));

  Manifest m;
  m.command = "train";
  m.config = json::parse(config_json(config));
  m.seed = config.seed;
  m.started = started;
  m.inputs = json{{"data", o.train.data}, {"fingerprint", o.train.fingerprint}};
  m.outputs = json{{"checkpoint", o.out}, {"log", log_path.string()}};
  write_manifest(m, sidecar(o.out, ".manifest.json"));
  out << "wrote checkpoint " << o.out << " (" << result.params.parameter_count() << " parameters)\n";
  return kOk;
}

// -------------------------------------------------------------------- eval

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string fingerprint;
  std::string labels;
  std::optional<double> eta;
  std::optional<int> clusters;
  std::uint64_t seed = 0;
  std::string out;
};

int distinct_count(const std::vector<int>& labels) {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  Inputs in = load_inputs(o.data, o.fingerprint, o.eta, err);
  std::vector<int> labels;
  if (!o.labels.empty()) {
    labels = read_labels(o.labels);
  } else if (in.data.has_labels()) {
    labels = in.data.labels();
  } else {
    throw ContractViolation("eval needs labels: the dataset has none and --labels was not given");
  }
  require(static_cast<Index>(labels.size()) == in.data.size(),
          "label count " + std::to_string(labels.size()) + " differs from sample count " +
              std::to_string(in.data.size()));
  const Checkpoint ck = load_checkpoint(o.checkpoint, in.data.view_dims());
  const int clusters = o.clusters.value_or(distinct_count(labels));

  const Matrix embedding = consensus_embedding(in.data, ck.params);
  KMeansConfig km;
  km.seed = o.seed;
  const KMeansResult fit = kmeans(embedding, clusters, km);
  const ClusterReport report = clustering_metrics(labels, fit.assignments);

  const std::string digest = digest_of(json::parse(config_json(ck.config)));
  nlohmann::ordered_json j;
  j["acc"] = report.acc;
  j["nmi"] = report.nmi;
  j["ari"] = report.ari;
  j["eta"] = in.fp.eta;
  j["seed"] = o.seed;
  j["config_digest"] = digest;
  j["clusters"] = clusters;
  j["n"] = in.data.size();
  write_json_file(j, o.out);

  Manifest m;
  m.command = "eval";
  m.config = json{{"seed", o.seed}, {"clusters", clusters}, {"checkpoint_config_digest", digest}};
  m.seed = o.seed;
  m.started = started;
  m.inputs = json{{"checkpoint", o.checkpoint}, {"data", o.data}, {"fingerprint", o.fingerprint}};
  m.outputs = json{{"report", o.out}};
  write_manifest(m, sidecar(o.out, ".manifest.json"));
  out << "acc " << report.acc << " nmi " << report.nmi << " ari " << report.ari << '\n';
  return kOk;
}

// ------------------------------------------------------------------- infer

struct InferOptions {
  std::string checkpoint;
  std::string data;
  std::string fingerprint;
  std::optional<double> eta;
  std::string out;
};

int cmd_infer(const InferOptions& o, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  Inputs in = load_inputs(o.data, o.fingerprint, o.eta, err);
  const Checkpoint ck = load_checkpoint(o.checkpoint, in.data.view_dims());
  const ImputationReport rep = evaluate_imputation(in.data, ck.params);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["views"] = nlohmann::ordered_json::array();
  for (int v = 1; v <= in.data.views(); ++v) {
    const std::string name = "recon_view_" + std::to_string(v) + ".csv";
    const Matrix& r = rep.reconstructions[static_cast<std::size_t>(v - 1)];
    write_csv_matrix(r, dir / name);
    double obs_sse = 0.0;
    Index observed = 0;
    for (Index i = 0; i < in.data.size(); ++i) {
      if (!in.data.masks()[static_cast<std::size_t>(i)][static_cast<std::size_t>(v - 1)]) continue;
      obs_sse += (r.row(i) - in.data.view(v).row(i)).squaredNorm();
      ++observed;
    }
    const auto& vi = rep.views[static_cast<std::size_t>(v - 1)];
    nlohmann::ordered_json e;
    e["view"] = v;
    e["file"] = name;
    e["missing"] = vi.missing;
    e["missing_mse"] = vi.model_mse;
    e["mean_imputation_mse"] = vi.baseline_mse;
    e["observed"] = observed;
    e["observed_mse"] = observed ? obs_sse / static_cast<double>(observed * in.data.view_dim(v)) : 0.0;
    j["views"].push_back(std::move(e));
  }
  j["missing_mse"] = rep.model_mse;
  j["mean_imputation_mse"] = rep.baseline_mse;
  write_json_file(j, dir / "report.json");

  Manifest m;
  m.command = "infer";
  m.config = json{{"checkpoint_config_digest", digest_of(json::parse(config_json(ck.config)))}};
  m.seed = ck.config.seed;
  m.started = started;
  m.inputs = json{{"checkpoint", o.checkpoint}, {"data", o.data}, {"fingerprint", o.fingerprint}};
  m.outputs = json{{"dir", dir.string()}};
  write_manifest(m, dir / "manifest.json");
  out << "missing-view mse " << rep.model_mse << " (mean imputation " << rep.baseline_mse << ")\n";
  return kOk;
}

// --------------------------------------------------------------- gradcheck

struct GradCheckOptions {
  Index d = 4;
  std::optional<Index> k;
  int views = 2;
  std::uint64_t seed = 0;
  Index hidden = 8;
  Index view_dim = 5;
  int samples = 4;
  double h = 1e-5;
  double tol = 1e-4;
  double abs_floor = 1e-7;
  std::string prior_mode = "cyclic";
};

void add_gradcheck(CLI::App& app, GradCheckOptions& o) {
  app.add_option("--d", o.d, "Latent dimension")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--k", o.k, "Shared dimension (default: min(2, d))")->check(CLI::PositiveNumber);
  app.add_option("--views", o.views, "Number of views")->capture_default_str()->check(CLI::Range(2, 16));
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--hidden", o.hidden, "Width of every hidden layer")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--view-dim", o.view_dim, "Features per view")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--samples", o.samples, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--step", o.h, "Finite-difference step")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--tol", o.tol, "Maximum relative error")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--abs-floor", o.abs_floor, "Denominator floor of the relative error")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--prior-mode", o.prior_mode, "Prior mode of the checked objective")
      ->capture_default_str()
      ->check(CLI::IsMember({"cyclic", "standard_normal", "fusion", "diagonal", "random_perm"}));
}

int cmd_gradcheck(const GradCheckOptions& o, std::ostream& out, std::ostream& err) {
  ModelGradCheckConfig c;
  c.views = o.views;
  c.d = o.d;
  c.k = o.k.value_or(std::min<Index>(2, o.d));
  c.hidden = o.hidden;
  c.view_dim = o.view_dim;
  c.samples = o.samples;
  c.seed = o.seed;
  c.h = o.h;
  c.tolerance = o.tol;
  c.abs_floor = o.abs_floor;
  c.prior_mode = parse_prior_mode(o.prior_mode);
  require(c.k <= c.d, "--k must not exceed --d");
  const ModelGradCheckResult r = check_model_gradients(c);
  out << "checked " << r.parameters << " parameters: max relative error " << r.report.max_rel_error << " at "
      << r.worst_path << " (analytic " << r.report.worst_analytic << ", numeric " << r.report.worst_numeric << ")\n";
  if (!(r.report.max_rel_error < o.tol)) {
    err << "gradient check failed: " << r.report.failures << " entries above " << o.tol << "; worst parameter "
        << r.worst_path << '\n';
    return kGradCheckFailed;
  }
  return kOk;
}

// ------------------------------------------------------------------ ablate

struct AblateOptions {
  TrainOptions train;
  std::vector<std::string> modes{"cyclic", "standard_normal", "random_perm"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<int> clusters;
  std::string out;
};

struct ModeRow {
  const char* model;
  const char* reconstruction;
  const char* regularization;
};

ModeRow mode_row(PriorMode mode) {
  switch (mode) {
    case PriorMode::random_perm: return {"2", "Random Perm.", "Random"};
    case PriorMode::standard_normal: return {"4", "Cyclic Perm.", "\"N(0,1)\""};
    case PriorMode::fusion: return {"5", "Cyclic Perm.", "Fusion"};
    case PriorMode::diagonal: return {"6", "Cyclic Perm.", "Diagonal"};
    case PriorMode::cyclic: return {"Ours", "Cyclic Perm.", "Cyclic"};
  }
  return {"?", "?", "?"};
}

std::string mean_sd_percent(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", 100.0 * mean, 100.0 * sd);
  return buf;
}

int cmd_ablate(const AblateOptions& o, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  std::vector<PriorMode> modes;
  for (const auto& m : o.modes) modes.push_back(parse_prior_mode(m));
  require(!o.seeds.empty(), "--seeds needs at least one value");
  TrainConfig base = to_config(o.train);
  Inputs in = load_inputs(o.train.data, o.train.fingerprint, o.train.eta, err);
  require(in.data.has_labels(), "ablate needs a labelled dataset");
  const auto& labels = in.data.labels();
  const int clusters = o.clusters.value_or(distinct_count(labels));

  std::ofstream csv(o.out, std::ios::binary);
  if (!csv) throw IoError("cannot write " + o.out);
  const fs::path runs_path = sidecar(o.out, ".runs.csv");
  std::ofstream runs(runs_path, std::ios::binary);
  if (!runs) throw IoError("cannot write " + runs_path.string());
  csv << "Model,Reconstruction,Regularization,ACC,NMI,ARI\n";
  runs << "prior_mode,seed,acc,nmi,ari\n";

  for (PriorMode mode : modes) {
    std::vector<double> acc, nmi, ari;
    for (std::uint64_t seed : o.seeds) {
      TrainConfig c = base;
      c.prior_mode = mode;
      c.seed = seed;
      const TrainResult result = train(in.data, in.fp, c);
      KMeansConfig km;
      km.seed = seed;
      const Matrix emb = consensus_embedding(in.data, result.params);
      const ClusterReport rep = clustering_metrics(labels, kmeans(emb, clusters, km).assignments);
      acc.push_back(rep.acc);
      nmi.push_back(rep.nmi);
      ari.push_back(rep.ari);
      runs << to_string(mode) << ',' << seed << ',' << format_double(rep.acc) << ',' << format_double(rep.nmi) << ','
           << format_double(rep.ari) << '\n';
      out << to_string(mode) << " seed " << seed << ": acc " << rep.acc << " nmi " << rep.nmi << " ari " << rep.ari
          << '\n';
    }
    const ModeRow row = mode_row(mode);
    csv << row.model << ',' << row.reconstruction << ',' << row.regularization << ',' << mean_sd_percent(acc) << ','
        << mean_sd_percent(nmi) << ',' << mean_sd_percent(ari) << '\n';
  }

  Manifest m;
  m.command = "ablate";
  m.config = json::parse(config_json(base));
  m.config["modes"] = o.modes;
  m.config["seeds"] = o.seeds;
  m.seed = base.seed;
  m.started = started;
  m.inputs = json{{"data", o.train.data}, {"fingerprint", o.train.fingerprint}};
  m.outputs = json{{"table", o.out}, {"runs", runs_path.string()}};
  write_manifest(m, sidecar(o.out, ".manifest.json"));
  return kOk;
}

}  // namespace

std::string config_digest(const std::string& json_text) { return digest_of(json::parse(json_text)); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view permutation VAE for incomplete multi-view data", "mvp"};
  app.require_subcommand(1);

  GenDataOptions gen_data;
  auto* gd = app.add_subcommand("gen-data", "Generate a synthetic clustered multi-view dataset");
  add_gen_data(*gd, gen_data);

  GenMasksOptions gen_masks_opts;
  auto* gm = app.add_subcommand("gen-masks", "Draw missing-view masks and the permutation fingerprint");
  add_gen_masks(*gm, gen_masks_opts);

  TrainCmdOptions train_opts;
  auto* tr = app.add_subcommand("train", "Train a model");
  add_train_options(*tr, train_opts.train, true);
  tr->add_option("--out", train_opts.out, "Checkpoint path")->required();
  tr->add_option("--log", train_opts.log, "Training log (default: <out>.log.jsonl)");
  tr->add_flag("--quiet", train_opts.quiet, "Suppress per-epoch progress");

  EvalOptions eval_opts;
  auto* ev = app.add_subcommand("eval", "Cluster the consensus representation and score it");
  ev->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint path")->required();
  ev->add_option("--data", eval_opts.data, "Dataset directory")->required();
  ev->add_option("--fingerprint", eval_opts.fingerprint, "Fingerprint file")->required();
  ev->add_option("--labels", eval_opts.labels, "Label file overriding the dataset's labels");
  ev->add_option("--eta", eval_opts.eta, "Expected missing rate (the fingerprint header wins)");
  ev->add_option("--clusters", eval_opts.clusters, "Number of clusters (default: distinct labels)")
      ->check(CLI::PositiveNumber);
  ev->add_option("--seed", eval_opts.seed, "k-means seed")->capture_default_str();
  ev->add_option("--out", eval_opts.out, "Metrics report (JSON)")->required();

  InferOptions infer_opts;
  auto* inf = app.add_subcommand("infer", "Reconstruct all views, including missing ones");
  inf->add_option("--checkpoint", infer_opts.checkpoint, "Checkpoint path")->required();
  inf->add_option("--data", infer_opts.data, "Dataset directory")->required();
  inf->add_option("--fingerprint", infer_opts.fingerprint, "Fingerprint file")->required();
  inf->add_option("--eta", infer_opts.eta, "Expected missing rate (the fingerprint header wins)");
  inf->add_option("--out", infer_opts.out, "Output directory")->required();

  GradCheckOptions gc_opts;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients on a tiny model");
  add_gradcheck(*gc, gc_opts);

  AblateOptions ablate_opts;
  auto* ab = app.add_subcommand("ablate", "Train every (prior mode, seed) pair and tabulate clustering metrics");
  add_train_options(*ab, ablate_opts.train, false);
  ab->add_option("--modes", ablate_opts.modes, "Prior modes")
      ->capture_default_str()
      ->check(CLI::IsMember({"cyclic", "standard_normal", "fusion", "diagonal", "random_perm"}));
  ab->add_option("--seeds", ablate_opts.seeds, "Training seeds")->capture_default_str();
  ab->add_option("--clusters", ablate_opts.clusters, "Number of clusters (default: distinct labels)")
      ->check(CLI::PositiveNumber);
  ab->add_option("--out", ablate_opts.out, "Summary CSV")->required();

  for (auto* sub : {gd, gm, tr, ev, inf, gc, ab}) {
    sub->add_option("--config", "JSON file of flag values; explicit flags take precedence");
  }

  std::vector<std::string> expanded;
  std::vector<const char*> argv{"mvp"};
  try {
    expanded = expand_config(args, app);
    for (const auto& a : expanded) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (gd->parsed()) return cmd_gen_data(gen_data, out);
    if (gm->parsed()) return cmd_gen_masks(gen_masks_opts, out);
    if (tr->parsed()) return cmd_train(train_opts, out, err);
    if (ev->parsed()) return cmd_eval(eval_opts, out, err);
    if (inf->parsed()) return cmd_infer(infer_opts, out, err);
    if (gc->parsed()) return cmd_gradcheck(gc_opts, out, err);
    if (ab->parsed()) return cmd_ablate(ablate_opts, out, err);
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kNumericalAbort;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace mvp::cli
