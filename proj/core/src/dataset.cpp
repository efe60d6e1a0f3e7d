#include "mvp/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "mvp/errors.hpp"

namespace mvp {

using ojson = nlohmann::ordered_json;

MultiViewDataset::MultiViewDataset(std::vector<Matrix> views, std::optional<std::vector<int>> labels)
    : views_(std::move(views)), labels_(std::move(labels)) {
  require(!views_.empty(), "dataset: at least one view required");
  const Index n = views_.front().rows();
  require(n >= 1, "dataset: no samples");
  for (std::size_t v = 0; v < views_.size(); ++v) {
    require(views_[v].rows() == n, "dataset: view " + std::to_string(v + 1) + " has " +
                                       std::to_string(views_[v].rows()) + " rows, view 1 has " +
                                       std::to_string(n));
    require(views_[v].cols() >= 1, "dataset: view " + std::to_string(v + 1) + " has no features");
  }
  if (labels_) {
    require(static_cast<Index>(labels_->size()) == n,
            "dataset: " + std::to_string(labels_->size()) + " labels for " + std::to_string(n) + " samples");
  }
  masks_.assign(static_cast<std::size_t>(n), Mask(views_.size(), 1));
}

std::vector<Index> MultiViewDataset::view_dims() const {
  std::vector<Index> dims;
  for (const auto& m : views_) dims.push_back(m.cols());
  return dims;
}

const std::vector<int>& MultiViewDataset::labels() const {
  require(labels_.has_value(), "dataset has no labels");
  return *labels_;
}

void MultiViewDataset::set_masks(MaskMatrix masks) {
  require(static_cast<Index>(masks.size()) == size(), "dataset: " + std::to_string(masks.size()) +
                                                          " masks for " + std::to_string(size()) + " samples");
  for (std::size_t i = 0; i < masks.size(); ++i) {
    require(static_cast<int>(masks[i].size()) == views(),
            "dataset: mask of sample " + std::to_string(i) + " has wrong length");
    require(std::any_of(masks[i].begin(), masks[i].end(), [](std::uint8_t b) { return b != 0; }),
            "dataset: sample " + std::to_string(i) + " has no observed view");
  }
  masks_ = std::move(masks);
}

SampleViews MultiViewDataset::sample(Index i) const {
  SampleViews out;
  out.reserve(views_.size());
  for (const auto& m : views_) out.push_back(m.row(i).transpose());
  return out;
}

MultiViewDataset gen_synthetic(const SyntheticConfig& c) {
  require(c.n >= 1, "gen_synthetic: n must be >= 1");
  require(c.clusters >= 1, "gen_synthetic: clusters must be >= 1");
  require(c.views >= 2, "gen_synthetic: at least 2 views required");
  require(static_cast<int>(c.view_dims.size()) == c.views,
          "gen_synthetic: " + std::to_string(c.view_dims.size()) + " view dims for " +
              std::to_string(c.views) + " views");
  for (Index dv : c.view_dims) require(dv >= 1, "gen_synthetic: view dims must be >= 1");
  require(c.shared_dim >= 1, "gen_synthetic: shared_dim must be >= 1");
  require(c.noise_sigma >= 0.0 && c.jitter >= 0.0 && c.centroid_scale >= 0.0,
          "gen_synthetic: scales must be non-negative");

  Rng root(c.seed);
  Rng centroid_rng = root.split();
  Rng map_rng = root.split();
  Rng sample_rng = root.split();

  const Index s = c.shared_dim;
  Matrix centroids(c.clusters, s);
  for (Index i = 0; i < centroids.rows(); ++i) {
    for (Index j = 0; j < s; ++j) centroids(i, j) = c.centroid_scale * centroid_rng.normal();
  }

  // Scale so that W h stays mostly inside tanh's responsive range.
  const double spread = std::sqrt(c.centroid_scale * c.centroid_scale + c.jitter * c.jitter);
  const double w_scale = 1.0 / (std::sqrt(static_cast<double>(s)) * std::max(spread, 1.0));
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  for (int v = 0; v < c.views; ++v) {
    Matrix w(c.view_dims[static_cast<std::size_t>(v)], s);
    for (Index j = 0; j < s; ++j) {
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = w_scale * map_rng.normal();
    }
    Vector b(w.rows());
    for (Index i = 0; i < b.size(); ++i) b[i] = 0.1 * map_rng.normal();
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }

  std::vector<Matrix> views;
  for (int v = 0; v < c.views; ++v) views.emplace_back(c.n, c.view_dims[static_cast<std::size_t>(v)]);
  std::vector<int> labels(static_cast<std::size_t>(c.n));
  Vector h(s);
  for (Index i = 0; i < c.n; ++i) {
    const int label = static_cast<int>(i % c.clusters);
    labels[static_cast<std::size_t>(i)] = label;
    for (Index j = 0; j < s; ++j) h[j] = centroids(label, j) + c.jitter * sample_rng.normal();
    for (int v = 0; v < c.views; ++v) {
      const Vector a = (weights[static_cast<std::size_t>(v)] * h + biases[static_cast<std::size_t>(v)]).array().tanh();
      for (Index f = 0; f < a.size(); ++f) {
        views[static_cast<std::size_t>(v)](i, f) = a[f] + c.noise_sigma * sample_rng.normal();
      }
    }
  }
  return MultiViewDataset(std::move(views), std::move(labels));
}

MaskMatrix gen_masks(Index n, int views, double eta, std::uint64_t seed) {
  require(n >= 0, "gen_masks: n must be >= 0");
  require(views >= 2, "gen_masks: at least 2 views required");
  require(eta >= 0.0 && eta <= 1.0, "gen_masks: eta must lie in [0, 1]");
  // The small slack keeps products such as 0.29 * 100 from flooring to 28.
  const auto incomplete = static_cast<Index>(std::floor(eta * static_cast<double>(n) + 1e-9));

  Rng rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_index(i))]);
  }

  MaskMatrix masks(static_cast<std::size_t>(n), Mask(static_cast<std::size_t>(views), 1));
  std::vector<int> pick(static_cast<std::size_t>(views));
  for (Index t = 0; t < incomplete; ++t) {
    Mask& m = masks[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])];
    const auto drop = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(views - 1)));
    std::iota(pick.begin(), pick.end(), 0);
    for (int j = 0; j < drop; ++j) {
      const auto r = j + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(views - j)));
      std::swap(pick[static_cast<std::size_t>(j)], pick[static_cast<std::size_t>(r)]);
      m[static_cast<std::size_t>(pick[static_cast<std::size_t>(j)])] = 0;
    }
  }
  return masks;
}

MaskMatrix Fingerprint::masks() const {
  MaskMatrix out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.mask);
  return out;
}

Fingerprint build_fingerprint(const MaskMatrix& masks, std::uint64_t seed, double eta, int pool) {
  require(!masks.empty(), "build_fingerprint: no masks");
  require(pool >= 1, "build_fingerprint: pool size must be >= 1");
  Fingerprint fp;
  fp.views = static_cast<int>(masks.front().size());
  fp.eta = eta;
  fp.seed = seed;
  Rng rng = Rng(seed).split();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    require(static_cast<int>(masks[i].size()) == fp.views,
            "build_fingerprint: mask " + std::to_string(i) + " has wrong length");
    const ViewSet obs = observed_views(masks[i]);
    require(!obs.empty(), "build_fingerprint: sample " + std::to_string(i) + " has no observed view");
    FingerprintRecord rec{masks[i], {}};
    for (int p = 0; p < pool; ++p) rec.bundles.push_back(make_bundle(fp.views, obs, rng));
    fp.records.push_back(std::move(rec));
  }
  return fp;
}

namespace {

ojson bundle_json(const PermutationBundle& b) {
  ojson arr = ojson::array();
  for (const auto& c : b.columns()) arr.push_back(c.map());
  return arr;
}

PermutationBundle parse_bundle(const ojson& j, const ViewSet& obs, int L, std::size_t sample,
                               std::size_t line) {
  if (!j.is_array() || static_cast<int>(j.size()) != L) {
    throw ParseError("sample " + std::to_string(sample) + ": expected " + std::to_string(L) +
                         " permutations per bundle", line);
  }
  std::vector<CyclicPermutation> cols;
  for (int l = 0; l < L; ++l) {
    const auto& p = j[static_cast<std::size_t>(l)];
    if (!p.is_array() || static_cast<int>(p.size()) != L) {
      throw ParseError("sample " + std::to_string(sample) + ": permutation " + std::to_string(l + 1) +
                           " must list " + std::to_string(L) + " integers", line);
    }
    std::vector<int> map;
    for (const auto& e : p) {
      if (!e.is_number_integer()) {
        throw ParseError("sample " + std::to_string(sample) + ": non-integer permutation entry", line);
      }
      map.push_back(e.get<int>());
    }
    try {
      if (!is_cyclic(map, obs)) {
        throw ParseError("sample " + std::to_string(sample) + ": permutation " + std::to_string(l + 1) +
                             " is not a single cycle over the observed views with missing views fixed",
                         line);
      }
      cols.emplace_back(Permutation(std::move(map)), obs);
    } catch (const ContractViolation& e) {
      throw ParseError("sample " + std::to_string(sample) + ": " + e.what(), line);
    }
  }
  return PermutationBundle(std::move(cols));
}

}  // namespace

void write_fingerprint(const Fingerprint& fp, std::ostream& out) {
  ojson header;
  header["version"] = 1;
  header["L"] = fp.views;
  header["eta"] = fp.eta;
  header["seed"] = fp.seed;
  header["n"] = fp.records.size();
  header["pool"] = fp.pool_size();
  out << header.dump() << '\n';
  for (const auto& r : fp.records) {
    ojson rec;
    ojson mask = ojson::array();
    for (auto b : r.mask) mask.push_back(static_cast<int>(b));
    rec["mask"] = std::move(mask);
    rec["perms"] = bundle_json(r.bundles.front());
    if (r.bundles.size() > 1) {
      ojson extra = ojson::array();
      for (std::size_t p = 1; p < r.bundles.size(); ++p) extra.push_back(bundle_json(r.bundles[p]));
      rec["extra_perms"] = std::move(extra);
    }
    out << rec.dump() << '\n';
  }
}

void write_fingerprint(const Fingerprint& fp, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open fingerprint file for writing: " + path.string());
  write_fingerprint(fp, out);
  if (!out) throw IoError("failed writing fingerprint file: " + path.string());
}

Fingerprint read_fingerprint(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto parse_line = [&](const std::string& text) {
    try {
      return ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
  };

  if (!std::getline(in, line)) throw ParseError("empty fingerprint file", 1);
  line_no = 1;
  const ojson header = parse_line(line);
  Fingerprint fp;
  std::size_t n = 0;
  int pool = 1;
  try {
    if (header.at("version").get<int>() != 1) {
      throw ParseError("unsupported fingerprint version " + header.at("version").dump(), 1);
    }
    fp.views = header.at("L").get<int>();
    fp.eta = header.at("eta").get<double>();
    fp.seed = header.at("seed").get<std::uint64_t>();
    n = header.at("n").get<std::size_t>();
    if (header.contains("pool")) pool = header.at("pool").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad fingerprint header: ") + e.what(), 1);
  }
  if (fp.views < 2) throw ParseError("fingerprint header: L must be >= 2", 1);
  if (pool < 1) throw ParseError("fingerprint header: pool must be >= 1", 1);

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t sample = fp.records.size();
    const ojson rec = parse_line(line);
    if (!rec.is_object() || !rec.contains("mask") || !rec.contains("perms")) {
      throw ParseError("sample " + std::to_string(sample) + ": record needs \"mask\" and \"perms\"", line_no);
    }
    const auto& mj = rec["mask"];
    if (!mj.is_array() || static_cast<int>(mj.size()) != fp.views) {
      throw ParseError("sample " + std::to_string(sample) + ": mask must have " + std::to_string(fp.views) +
                           " entries", line_no);
    }
    FingerprintRecord r;
    for (const auto& b : mj) {
      if (!b.is_number_integer() || (b.get<int>() != 0 && b.get<int>() != 1)) {
        throw ParseError("sample " + std::to_string(sample) + ": mask entries must be 0 or 1", line_no);
      }
      r.mask.push_back(static_cast<std::uint8_t>(b.get<int>()));
    }
    const ViewSet obs = observed_views(r.mask);
    if (obs.empty()) throw ParseError("sample " + std::to_string(sample) + ": mask has no observed view", line_no);
    r.bundles.push_back(parse_bundle(rec["perms"], obs, fp.views, sample, line_no));
    if (rec.contains("extra_perms")) {
      for (const auto& b : rec["extra_perms"]) r.bundles.push_back(parse_bundle(b, obs, fp.views, sample, line_no));
    }
    if (static_cast<int>(r.bundles.size()) != pool) {
      throw ParseError("sample " + std::to_string(sample) + ": expected " + std::to_string(pool) +
                           " permutation bundles", line_no);
    }
    fp.records.push_back(std::move(r));
  }
  if (fp.records.size() != n) {
    throw ParseError("fingerprint header announces " + std::to_string(n) + " records, file has " +
                         std::to_string(fp.records.size()), line_no);
  }
  return fp;
}

Fingerprint read_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open fingerprint file: " + path.string());
  return read_fingerprint(in);
}

double resolve_eta(const Fingerprint& fp, std::optional<double> flag_eta, std::ostream& warnings) {
  if (flag_eta && *flag_eta != fp.eta) {
    warnings << "warning: --eta " << *flag_eta << " differs from the fingerprint header (eta " << fp.eta
             << "); using the fingerprint value\n";
  }
  return fp.eta;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& raw, const std::filesystem::path& path, std::size_t line, std::size_t col) {
  const std::string cell = trim(raw);
  T value{};
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(path.string() + ": non-numeric cell '" + cell + "' in column " + std::to_string(col + 1),
                     line);
  }
  return value;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

Matrix read_csv_matrix(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) row.push_back(parse_number<double>(cells[c], path, line_no, c));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string() + ": expected " + std::to_string(rows.front().size()) + " columns, found " +
                           std::to_string(row.size()), line_no);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows", line_no);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

void write_csv_matrix(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open CSV file for writing: " + path.string());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing CSV file: " + path.string());
}

std::vector<int> read_labels(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 1) throw ParseError(path.string() + ": expected one label per line", line_no);
    labels.push_back(parse_number<int>(cells.front(), path, line_no, 0));
  }
  return labels;
}

void write_labels(const std::vector<int>& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open label file for writing: " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw IoError("failed writing label file: " + path.string());
}

void zscore_columns(Matrix& m) {
  const double n = static_cast<double>(m.rows());
  for (Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    m.col(j).array() -= mean;
    const double sd = std::sqrt(m.col(j).squaredNorm() / n);
    if (sd > 0.0) m.col(j) /= sd;
  }
}

MultiViewDataset load_csv(const std::vector<std::filesystem::path>& view_paths,
                          const std::optional<std::filesystem::path>& label_path, const CsvOptions& options) {
  require(!view_paths.empty(), "load_csv: no view files given");
  std::vector<Matrix> views;
  for (const auto& p : view_paths) {
    Matrix m = read_csv_matrix(p, options.header);
    if (!views.empty() && m.rows() != views.front().rows()) {
      throw ParseError(p.string() + ": has " + std::to_string(m.rows()) + " rows, " + view_paths.front().string() +
                       " has " + std::to_string(views.front().rows()));
    }
    if (options.zscore) zscore_columns(m);
    views.push_back(std::move(m));
  }
  std::optional<std::vector<int>> labels;
  if (label_path) {
    labels = read_labels(*label_path, options.header);
    if (static_cast<Index>(labels->size()) != views.front().rows()) {
      throw ParseError(label_path->string() + ": has " + std::to_string(labels->size()) + " labels for " +
                       std::to_string(views.front().rows()) + " samples");
    }
  }
  return MultiViewDataset(std::move(views), std::move(labels));
}

MultiViewDataset load_dataset_dir(const std::filesystem::path& dir) {
  const auto manifest = dir / "dataset.json";
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open dataset descriptor: " + manifest.string());
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  std::vector<std::filesystem::path> views;
  std::optional<std::filesystem::path> labels;
  CsvOptions options;
  try {
    for (const auto& v : j.at("views")) views.push_back(dir / v.get<std::string>());
    if (j.contains("labels") && !j["labels"].is_null()) labels = dir / j["labels"].get<std::string>();
    options.header = j.value("header", false);
    options.zscore = j.value("zscore", false);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  return load_csv(views, labels, options);
}

void save_dataset_dir(const MultiViewDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ojson j;
  j["views"] = ojson::array();
  for (int v = 1; v <= data.views(); ++v) {
    const std::string name = "view_" + std::to_string(v) + ".csv";
    write_csv_matrix(data.view(v), dir / name);
    j["views"].push_back(name);
  }
  if (data.has_labels()) {
    write_labels(data.labels(), dir / "labels.csv");
    j["labels"] = "labels.csv";
  }
  j["header"] = false;
  j["zscore"] = false;
  std::ofstream out(dir / "dataset.json", std::ios::binary);
  if (!out) throw IoError("cannot write dataset descriptor in " + dir.string());
  out << j.dump(2) << '\n';
}

}  // namespace mvp
