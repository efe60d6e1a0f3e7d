#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvp/dataset.hpp"
#include "mvp/errors.hpp"

namespace fs = std::filesystem;
using mvp::Matrix;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mvp_dataset_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int incomplete_count(const mvp::MaskMatrix& masks) {
  int n = 0;
  for (const auto& m : masks) n += std::find(m.begin(), m.end(), 0) != m.end() ? 1 : 0;
  return n;
}

TEST(GenSynthetic, DeterministicAndBalanced) {
  mvp::SyntheticConfig c;
  c.n = 100;
  c.clusters = 3;
  const auto a = mvp::gen_synthetic(c);
  const auto b = mvp::gen_synthetic(c);
  for (int v = 1; v <= 3; ++v) EXPECT_EQ(a.view(v), b.view(v));
  EXPECT_EQ(a.labels(), b.labels());
  std::vector<int> counts(3, 0);
  for (int l : a.labels()) ++counts[static_cast<std::size_t>(l)];
  for (int cnt : counts) EXPECT_LE(std::abs(cnt - 100 / 3), 1);
  EXPECT_EQ(a.view_dims(), (std::vector<mvp::Index>{10, 10, 10}));
  c.seed = 1;
  EXPECT_NE(mvp::gen_synthetic(c).view(1), a.view(1));
}

TEST(GenSynthetic, SingleClusterWithoutNoiseRepeatsUpToJitter) {
  mvp::SyntheticConfig c;
  c.n = 20;
  c.clusters = 1;
  c.noise_sigma = 0.0;
  c.jitter = 0.0;
  const auto d = mvp::gen_synthetic(c);
  for (int v = 1; v <= 3; ++v) {
    for (mvp::Index i = 1; i < d.size(); ++i) EXPECT_EQ(d.view(v).row(i), d.view(v).row(0));
  }
  c.jitter = 0.3;
  const auto j = mvp::gen_synthetic(c);
  EXPECT_NE(j.view(1).row(1), j.view(1).row(0));
}

TEST(GenSynthetic, Contracts) {
  mvp::SyntheticConfig c;
  c.views = 1;
  c.view_dims = {4};
  EXPECT_THROW(mvp::gen_synthetic(c), mvp::ContractViolation);
  c = {};
  c.view_dims = {4, 4};
  EXPECT_THROW(mvp::gen_synthetic(c), mvp::ContractViolation);
  c = {};
  c.noise_sigma = -1.0;
  EXPECT_THROW(mvp::gen_synthetic(c), mvp::ContractViolation);
}

TEST(GenMasks, IncompleteCountIsFloorOfEtaN) {
  const auto m = mvp::gen_masks(10, 3, 0.5, 0);
  EXPECT_EQ(incomplete_count(m), 5);
  for (double eta : {0.0, 0.1, 0.29, 0.33, 0.7, 1.0}) {
    const auto masks = mvp::gen_masks(100, 4, eta, 3);
    EXPECT_EQ(incomplete_count(masks), static_cast<int>(std::floor(eta * 100 + 1e-9))) << eta;
    for (const auto& row : masks) {
      EXPECT_NE(std::find(row.begin(), row.end(), 1), row.end());
    }
  }
  EXPECT_EQ(incomplete_count(mvp::gen_masks(7, 3, 0.5, 0)), 3);
}

TEST(GenMasks, EtaZeroKeepsEverything) {
  for (const auto& row : mvp::gen_masks(50, 5, 0.0, 1)) EXPECT_EQ(row, mvp::Mask(5, 1));
}

TEST(GenMasks, TwoViewsLeaveExactlyOneObserved) {
  for (const auto& row : mvp::gen_masks(200, 2, 1.0, 2)) EXPECT_EQ(row[0] + row[1], 1);
}

TEST(GenMasks, DropCountsCoverOneToLMinusOne) {
  std::vector<int> seen(5, 0);
  for (const auto& row : mvp::gen_masks(2000, 5, 1.0, 4)) {
    const int dropped = static_cast<int>(std::count(row.begin(), row.end(), 0));
    ASSERT_GE(dropped, 1);
    ASSERT_LE(dropped, 4);
    ++seen[static_cast<std::size_t>(dropped)];
  }
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(seen[static_cast<std::size_t>(k)], 500, 5 * std::sqrt(2000 * 0.25 * 0.75));
}

TEST(GenMasks, DeterministicAndValidated) {
  EXPECT_EQ(mvp::gen_masks(30, 3, 0.4, 9), mvp::gen_masks(30, 3, 0.4, 9));
  EXPECT_THROW(mvp::gen_masks(10, 1, 0.5, 0), mvp::ContractViolation);
  EXPECT_THROW(mvp::gen_masks(10, 3, 1.5, 0), mvp::ContractViolation);
  EXPECT_THROW(mvp::gen_masks(10, 3, -0.1, 0), mvp::ContractViolation);
}

TEST(Fingerprint, PartialMaskCyclesObservedViewsOnly) {
  const mvp::MaskMatrix masks{{0, 1, 1, 0, 1}};
  const auto fp = mvp::build_fingerprint(masks, 0, 0.5);
  ASSERT_EQ(fp.records.size(), 1u);
  for (const auto& bundle : fp.records[0].bundles) {
    for (const auto& c : bundle.columns()) {
      EXPECT_EQ(c(1), 1);
      EXPECT_EQ(c(4), 4);
      EXPECT_TRUE(mvp::is_cyclic(c.map(), {2, 3, 5}));
    }
  }
}

TEST(Fingerprint, TwoViewAndSingleViewMasks) {
  const auto fp = mvp::build_fingerprint({{1, 1}, {0, 1}}, 1, 0.5, 3);
  EXPECT_EQ(fp.pool_size(), 3);
  for (const auto& c : fp.records[0].bundles[0].columns()) EXPECT_EQ(c.map(), (std::vector<int>{2, 1}));
  for (const auto& b : fp.records[1].bundles) {
    for (const auto& c : b.columns()) EXPECT_EQ(c.map(), (std::vector<int>{1, 2}));
  }
  EXPECT_EQ(fp.masks(), (mvp::MaskMatrix{{1, 1}, {0, 1}}));
}

TEST(Fingerprint, DeterminedBySeed) {
  const auto masks = mvp::gen_masks(40, 4, 0.5, 5);
  const auto a = mvp::build_fingerprint(masks, 7, 0.5);
  const auto b = mvp::build_fingerprint(masks, 7, 0.5);
  const auto c = mvp::build_fingerprint(masks, 8, 0.5);
  std::ostringstream sa, sb, sc;
  mvp::write_fingerprint(a, sa);
  mvp::write_fingerprint(b, sb);
  mvp::write_fingerprint(c, sc);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());
}

TEST(FingerprintFile, RoundTripIsExact) {
  const auto dir = scratch_dir("roundtrip");
  const auto fp = mvp::build_fingerprint(mvp::gen_masks(25, 3, 0.6, 1), 2, 0.6);
  mvp::write_fingerprint(fp, dir / "a.jsonl");
  const auto back = mvp::read_fingerprint(dir / "a.jsonl");
  EXPECT_EQ(back.views, fp.views);
  EXPECT_EQ(back.eta, fp.eta);
  EXPECT_EQ(back.seed, fp.seed);
  ASSERT_EQ(back.records.size(), fp.records.size());
  for (std::size_t i = 0; i < fp.records.size(); ++i) {
    EXPECT_EQ(back.records[i].mask, fp.records[i].mask);
    EXPECT_EQ(back.records[i].bundles, fp.records[i].bundles);
  }
  mvp::write_fingerprint(back, dir / "b.jsonl");
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  const std::string first_line = slurp(dir / "a.jsonl").substr(0, slurp(dir / "a.jsonl").find('\n'));
  EXPECT_NE(first_line.find("\"version\":1"), std::string::npos);
  EXPECT_NE(first_line.find("\"L\":3"), std::string::npos);
}

TEST(FingerprintFile, NonCyclicRecordNamesTheSample) {
  std::istringstream in(
      "{\"version\":1,\"L\":3,\"eta\":0.0,\"seed\":0,\"n\":2,\"pool\":1}\n"
      "{\"mask\":[1,1,1],\"perms\":[[2,3,1],[3,1,2],[2,3,1]]}\n"
      "{\"mask\":[1,1,1],\"perms\":[[2,3,1],[2,1,3],[2,3,1]]}\n");
  try {
    mvp::read_fingerprint(in);
    FAIL() << "expected a parse error";
  } catch (const mvp::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 1"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(FingerprintFile, MalformedInputReportsLine) {
  std::istringstream bad_json(
      "{\"version\":1,\"L\":2,\"eta\":0.0,\"seed\":0,\"n\":1,\"pool\":1}\n"
      "{\"mask\":[1,1],\"perms\":[[2,1],[2,1]]\n");
  try {
    mvp::read_fingerprint(bad_json);
    FAIL();
  } catch (const mvp::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream missing_view("{\"version\":1,\"L\":2,\"eta\":0.0,\"seed\":0,\"n\":1,\"pool\":1}\n"
                                  "{\"mask\":[0,0],\"perms\":[[1,2],[1,2]]}\n");
  EXPECT_THROW(mvp::read_fingerprint(missing_view), mvp::ParseError);
  std::istringstream wrong_version("{\"version\":2,\"L\":2,\"eta\":0.0,\"seed\":0,\"n\":0,\"pool\":1}\n");
  EXPECT_THROW(mvp::read_fingerprint(wrong_version), mvp::ParseError);
  std::istringstream empty("");
  EXPECT_THROW(mvp::read_fingerprint(empty), mvp::ParseError);
  EXPECT_THROW(mvp::read_fingerprint(fs::path("/nonexistent/fp.jsonl")), mvp::IoError);
}

TEST(FingerprintFile, HeaderEtaWinsOverFlag) {
  const auto fp = mvp::build_fingerprint({{1, 1}}, 0, 0.3);
  std::ostringstream warn;
  EXPECT_EQ(mvp::resolve_eta(fp, 0.5, warn), 0.3);
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
  std::ostringstream quiet;
  EXPECT_EQ(mvp::resolve_eta(fp, 0.3, quiet), 0.3);
  EXPECT_EQ(mvp::resolve_eta(fp, std::nullopt, quiet), 0.3);
  EXPECT_TRUE(quiet.str().empty());
}

TEST(Csv, TwoThreeRowViews) {
  const auto dir = scratch_dir("csv");
  spit(dir / "a.csv", "1,2\n3,4\n5,6\n");
  spit(dir / "b.csv", "x,y,z\n0.5,1e-3,-2\n1,1,1\n2,2,2\n");
  mvp::CsvOptions opt;
  const auto d = mvp::load_csv({dir / "a.csv"}, std::nullopt, opt);
  EXPECT_EQ(d.size(), 3);
  EXPECT_FALSE(d.has_labels());
  EXPECT_THROW(d.labels(), mvp::ContractViolation);
  spit(dir / "b_noheader.csv", "0.5,1e-3,-2\n1,1,1\n2,2,2\n");
  const auto two = mvp::load_csv({dir / "a.csv", dir / "b_noheader.csv"}, std::nullopt);
  EXPECT_EQ(two.views(), 2);
  EXPECT_EQ(two.size(), 3);
  EXPECT_EQ(two.view(2)(0, 1), 1e-3);
  EXPECT_EQ(mvp::read_csv_matrix(dir / "b.csv", true)(0, 2), -2.0);
}

TEST(Csv, ErrorsAreReported) {
  const auto dir = scratch_dir("csv_errors");
  spit(dir / "a.csv", "1,2\n3,4\n5,6\n");
  spit(dir / "short.csv", "1\n2\n");
  spit(dir / "bad.csv", "1,2\n3,oops\n");
  spit(dir / "ragged.csv", "1,2\n3\n");
  EXPECT_THROW(mvp::load_csv({dir / "a.csv", dir / "short.csv"}, std::nullopt), mvp::ParseError);
  try {
    mvp::read_csv_matrix(dir / "bad.csv");
    FAIL();
  } catch (const mvp::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("oops"), std::string::npos);
  }
  EXPECT_THROW(mvp::read_csv_matrix(dir / "ragged.csv"), mvp::ParseError);
  EXPECT_THROW(mvp::read_csv_matrix(dir / "missing.csv"), mvp::IoError);
}

TEST(Csv, ZscoreStandardizesEachColumn) {
  const auto dir = scratch_dir("zscore");
  spit(dir / "a.csv", "1,10,5\n2,20,5\n3,40,5\n4,80,5\n");
  spit(dir / "labels.csv", "0\n1\n0\n1\n");
  mvp::CsvOptions opt;
  opt.zscore = true;
  const auto d = mvp::load_csv({dir / "a.csv"}, dir / "labels.csv", opt);
  EXPECT_EQ(d.labels(), (std::vector<int>{0, 1, 0, 1}));
  const Matrix& m = d.view(1);
  for (int c = 0; c < 2; ++c) {
    const double mean = m.col(c).mean();
    const double var = (m.col(c).array() - mean).square().sum() / static_cast<double>(m.rows());
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-9);
  }
  EXPECT_TRUE(m.col(2).isZero());
}

TEST(DatasetDir, SaveAndLoadKeepsValuesAndLabels) {
  const auto dir = scratch_dir("dir");
  mvp::SyntheticConfig c;
  c.n = 12;
  c.view_dims = {3, 2, 4};
  const auto d = mvp::gen_synthetic(c);
  mvp::save_dataset_dir(d, dir);
  const auto back = mvp::load_dataset_dir(dir);
  EXPECT_EQ(back.views(), 3);
  for (int v = 1; v <= 3; ++v) EXPECT_EQ(back.view(v), d.view(v));
  EXPECT_EQ(back.labels(), d.labels());
  EXPECT_THROW(mvp::load_dataset_dir(dir / "nope"), mvp::IoError);
}

TEST(MultiViewDataset, MaskValidation) {
  mvp::MultiViewDataset d({Matrix::Zero(2, 2), Matrix::Zero(2, 3)});
  EXPECT_EQ(d.masks(), (mvp::MaskMatrix{{1, 1}, {1, 1}}));
  EXPECT_THROW(d.set_masks({{1, 1}}), mvp::ContractViolation);
  EXPECT_THROW(d.set_masks({{1, 1}, {0, 0}}), mvp::ContractViolation);
  EXPECT_THROW(d.set_masks({{1, 1}, {1, 1, 1}}), mvp::ContractViolation);
  d.set_masks({{1, 0}, {0, 1}});
  EXPECT_EQ(d.masks()[1], (mvp::Mask{0, 1}));
  EXPECT_THROW(mvp::MultiViewDataset({Matrix::Zero(2, 2), Matrix::Zero(3, 2)}), mvp::ContractViolation);
}

}  // namespace
