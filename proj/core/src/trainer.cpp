#include "mvp/trainer.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "mvp/engine.hpp"
#include "mvp/errors.hpp"

namespace mvp {

using nlohmann::json;

void TrainConfig::validate() const {
  require(d >= 1, "d must be >= 1");
  require(k >= 1 && k <= d, "k must satisfy 1 <= k <= d (k = " + std::to_string(k) + ", d = " +
                                std::to_string(d) + ")");
  require(std::isfinite(beta_z) && beta_z > 0.0, "beta_z must be positive");
  require(std::isfinite(beta_omega) && beta_omega > 0.0, "beta_omega must be positive");
  require(epochs >= 0, "epochs must be >= 0");
  require(warmup_epochs >= 0 && warmup_epochs <= epochs,
          "warmup_epochs must satisfy 0 <= warmup_epochs <= epochs (warmup " + std::to_string(warmup_epochs) +
              ", epochs " + std::to_string(epochs) + ")");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(std::isfinite(lr) && lr > 0.0, "lr must be positive");
  require(!arch.encoder_hidden.empty(), "encoder needs at least one hidden layer");
  for (const auto* widths : {&arch.encoder_hidden, &arch.correspondence_hidden, &arch.decoder_hidden}) {
    for (Index w : *widths) require(w >= 1, "hidden widths must be >= 1");
  }
}

namespace {

json arch_to_json(const Architecture& a) {
  return json{{"encoder_hidden", a.encoder_hidden},
              {"correspondence_hidden", a.correspondence_hidden},
              {"decoder_hidden", a.decoder_hidden},
              {"encoder_activation", to_string(a.encoder_activation)},
              {"correspondence_activation", to_string(a.correspondence_activation)},
              {"decoder_activation", to_string(a.decoder_activation)},
              {"decoder_output", to_string(a.decoder_output)}};
}

Architecture arch_from_json(const json& j) {
  Architecture a;
  a.encoder_hidden = j.at("encoder_hidden").get<std::vector<Index>>();
  a.correspondence_hidden = j.at("correspondence_hidden").get<std::vector<Index>>();
  a.decoder_hidden = j.at("decoder_hidden").get<std::vector<Index>>();
  a.encoder_activation = parse_activation(j.at("encoder_activation").get<std::string>());
  a.correspondence_activation = parse_activation(j.at("correspondence_activation").get<std::string>());
  a.decoder_activation = parse_activation(j.at("decoder_activation").get<std::string>());
  a.decoder_output = parse_activation(j.at("decoder_output").get<std::string>());
  return a;
}

json config_to_json(const TrainConfig& c) {
  return json{{"d", c.d},
              {"k", c.k},
              {"beta_z", c.beta_z},
              {"beta_omega", c.beta_omega},
              {"warmup_epochs", c.warmup_epochs},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"seed", c.seed},
              {"prior_mode", to_string(c.prior_mode)},
              {"beta_in_warmup", c.beta_in_warmup},
              {"arch", arch_to_json(c.arch)}};
}

TrainConfig config_from_json_value(const json& j) {
  TrainConfig c;
  c.d = j.at("d").get<Index>();
  c.k = j.at("k").get<Index>();
  c.beta_z = j.at("beta_z").get<double>();
  c.beta_omega = j.at("beta_omega").get<double>();
  c.warmup_epochs = j.at("warmup_epochs").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.prior_mode = parse_prior_mode(j.at("prior_mode").get<std::string>());
  c.beta_in_warmup = j.at("beta_in_warmup").get<bool>();
  c.arch = arch_from_json(j.at("arch"));
  return c;
}

void check_gradients(ModelParams& model, int epoch) {
  for (const auto& p : model.parameters()) {
    for (double g : p.grad) {
      if (!std::isfinite(g)) {
        throw NumericalError("epoch " + std::to_string(epoch) + ": non-finite gradient in " + p.name);
      }
    }
  }
}

}  // namespace

std::string config_json(const TrainConfig& config) { return config_to_json(config).dump(); }

TrainConfig config_from_json(const std::string& text) {
  try {
    return config_from_json_value(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad training config: ") + e.what());
  }
}

TrainResult train(const MultiViewDataset& data, const Fingerprint& fp, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const int L = data.views();
  require(fp.views == L, "fingerprint has " + std::to_string(fp.views) + " views, dataset has " + std::to_string(L));
  require(static_cast<Index>(fp.records.size()) == data.size(),
          "fingerprint has " + std::to_string(fp.records.size()) + " records, dataset has " +
              std::to_string(data.size()) + " samples");
  require(fp.pool_size() >= 1, "fingerprint stores no permutation bundles");

  ModelParams model(ModelDims{data.view_dims(), config.d, config.k}, config.arch, config.seed);
  std::vector<EpochLog> log;
  if (config.epochs == 0) return {std::move(model), std::move(log)};

  const auto n = static_cast<std::size_t>(data.size());
  const int pool = fp.pool_size();
  std::vector<SampleViews> samples;
  std::vector<ViewSet> observed;
  std::vector<std::vector<std::vector<Permutation>>> perms(n);  // [sample][bundle][column]
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples.push_back(data.sample(static_cast<Index>(i)));
    observed.push_back(observed_views(fp.records[i].mask));
    for (const auto& b : fp.records[i].bundles) perms[i].push_back(b.permutations());
  }

  Rng root(config.seed);
  Rng shuffle_rng = root.split();
  Rng noise_rng = root.split();
  Rng perm_rng = root.split();

  auto params = model.parameters();
  AdamState adam(AdamConfig{config.lr}, params);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  ObjectiveConfig warm{config.beta_in_warmup ? config.beta_z : 1.0,
                       config.beta_in_warmup ? config.beta_omega : 1.0, config.prior_mode};
  ObjectiveConfig main{config.beta_z, config.beta_omega, config.prior_mode};

  const auto B = static_cast<std::size_t>(config.batch_size);
  std::vector<SampleNoise> noise(B);
  std::vector<std::vector<Permutation>> random_cols(B);
  std::vector<BatchItem> batch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const bool warmup = epoch < config.warmup_epochs;
    const ObjectiveConfig& obj = warmup ? warm : main;
    const ObjectiveKind kind = warmup ? ObjectiveKind::basic : ObjectiveKind::combined;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    double recon = 0.0, kl_z = 0.0, kl_omega = 0.0;
    for (std::size_t start = 0; start < n; start += B) {
      const std::size_t stop = std::min(n, start + B);
      batch.clear();
      for (std::size_t t = start; t < stop; ++t) {
        const std::size_t i = order[t];
        const std::size_t slot = t - start;
        noise[slot] = draw_sample_noise(L, config.d, config.k, observed[i], noise_rng);
        std::span<const Permutation> cols = perms[i][static_cast<std::size_t>(epoch % pool)];
        if (config.prior_mode == PriorMode::random_perm) {
          random_cols[slot].clear();
          for (int l = 0; l < L; ++l) random_cols[slot].push_back(random_permutation(L, observed[i], perm_rng));
          cols = random_cols[slot];
        }
        batch.push_back(BatchItem{&samples[i], fp.records[i].mask, cols, &noise[slot]});
      }
      model.zero_grad();
      LossBreakdown loss;
      try {
        loss = evaluate_batch(model, batch, kind, obj, true);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      check_gradients(model, epoch);
      adam_step(params, adam);
      const double weight = static_cast<double>(stop - start);
      recon += weight * loss.recon;
      kl_z += weight * loss.kl_z;
      kl_omega += weight * loss.kl_omega;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const LossBreakdown mean = LossBreakdown::from_terms(recon * inv_n, kl_z * inv_n, kl_omega * inv_n, obj);
    EpochLog entry{epoch, warmup ? "warmup" : "main", -mean.recon, mean.kl_z, mean.kl_omega, mean.total};
    if (!std::isfinite(entry.total)) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": non-finite total loss");
    }
    if (on_epoch) on_epoch(entry);
    log.push_back(std::move(entry));
  }
  return {std::move(model), std::move(log)};
}

std::string epoch_log_json(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["phase"] = e.phase;
  j["recon"] = e.recon;
  j["kl_z"] = e.kl_z;
  j["kl_omega"] = e.kl_omega;
  j["total"] = e.total;
  return j.dump();
}

void write_log_jsonl(const std::vector<EpochLog>& log, std::ostream& out) {
  for (const auto& e : log) out << epoch_log_json(e) << '\n';
}

namespace {

constexpr const char* kCheckpointFormat = "mvp-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr std::size_t kMaxHeaderBytes = 1 << 20;

void put_le(double x, char* out) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) out[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
}

double get_le(const unsigned char* in) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(in[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const TrainConfig& config, const std::filesystem::path& path) {
  ModelParams copy = params;
  const std::vector<double> values = copy.flat_values();
  nlohmann::ordered_json header;
  header["format"] = kCheckpointFormat;
  header["version"] = kCheckpointVersion;
  header["L"] = params.views();
  header["d"] = params.dims().d;
  header["k"] = params.dims().k;
  header["view_dims"] = params.dims().view_dims;
  header["arch"] = arch_to_json(params.architecture());
  header["seed"] = params.seed();
  header["config"] = config_to_json(config);
  header["param_count"] = values.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out << header.dump() << '\n';
  std::vector<char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) put_le(values[i], buf.data() + 8 * i);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<std::vector<Index>>& expected_view_dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  char c;
  while (in.get(c) && c != '\n') {
    line.push_back(c);
    if (line.size() > kMaxHeaderBytes) throw ParseError("checkpoint header too long or missing newline", 1);
  }
  if (c != '\n') throw ParseError("checkpoint header is truncated", 1);
  const auto header_bytes = line.size() + 1;

  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("corrupted checkpoint header: ") + e.what(), 1);
  }
  ModelDims dims;
  Architecture arch;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  try {
    if (header.at("format").get<std::string>() != kCheckpointFormat) {
      throw ParseError("not a checkpoint file (format " + header.at("format").dump() + ")", 1);
    }
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                           std::to_string(kCheckpointVersion) + ")", 1);
    }
    dims.view_dims = header.at("view_dims").get<std::vector<Index>>();
    dims.d = header.at("d").get<Index>();
    dims.k = header.at("k").get<Index>();
    if (header.at("L").get<int>() != dims.views()) throw ParseError("checkpoint header: L disagrees with view_dims", 1);
    arch = arch_from_json(header.at("arch"));
    seed = header.at("seed").get<std::uint64_t>();
    config = config_from_json_value(header.at("config"));
    count = header.at("param_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("corrupted checkpoint header: ") + e.what(), 1);
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("corrupted checkpoint header: ") + e.what(), 1);
  }
  if (dims.views() < 1 || dims.d < 1 || dims.k < 1 || dims.k > dims.d) {
    throw ParseError("checkpoint header: inconsistent dimensions", 1);
  }
  for (Index dv : dims.view_dims) {
    if (dv < 1) throw ParseError("checkpoint header: view dimensions must be positive", 1);
  }
  std::size_t expected = 0;
  try {
    expected = expected_parameter_count(dims, arch);
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), 1);
  }
  if (expected != count) {
    throw ParseError("checkpoint header: param_count " + std::to_string(count) + " does not match the architecture (" +
                         std::to_string(expected) + ")", 1);
  }
  const auto file_size = std::filesystem::file_size(path);
  if (file_size != header_bytes + 8 * count) {
    throw ParseError("checkpoint blob has " + std::to_string(file_size - header_bytes) + " bytes, expected " +
                     std::to_string(8 * count) + " (truncated or corrupted file)");
  }
  if (expected_view_dims) {
    const auto& want = *expected_view_dims;
    if (want.size() != dims.view_dims.size()) {
      throw ContractViolation("checkpoint has " + std::to_string(dims.view_dims.size()) + " views, data has " +
                              std::to_string(want.size()));
    }
    for (std::size_t v = 0; v < want.size(); ++v) {
      if (want[v] != dims.view_dims[v]) {
        throw ContractViolation("view " + std::to_string(v + 1) + " dimension mismatch: checkpoint expects " +
                                std::to_string(dims.view_dims[v]) + " features, data has " + std::to_string(want[v]));
      }
    }
  }

  ModelParams params(dims, arch, seed);
  std::array<unsigned char, 8 * 512> chunk;
  for (const auto& p : params.parameters()) {
    std::size_t done = 0;
    while (done < p.value.size()) {
      const std::size_t take = std::min<std::size_t>(p.value.size() - done, chunk.size() / 8);
      in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(8 * take));
      if (!in) throw ParseError("checkpoint blob is truncated");
      for (std::size_t i = 0; i < take; ++i) p.value[done + i] = get_le(chunk.data() + 8 * i);
      done += take;
    }
  }
  return {std::move(params), config};
}

}  // namespace mvp
