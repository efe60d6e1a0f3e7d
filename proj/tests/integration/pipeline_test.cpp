#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "mvp/dataset.hpp"
#include "mvp/evaluation.hpp"
#include "mvp/trainer.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mvp_pipeline_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Pipeline, GenerateTrainCheckpointEvaluateInfer) {
  const fs::path dir = scratch_dir("end_to_end");

  mvp::SyntheticConfig s;
  s.n = 150;
  s.view_dims = {8, 6, 5};
  mvp::save_dataset_dir(mvp::gen_synthetic(s), dir / "data");
  auto data = mvp::load_dataset_dir(dir / "data");
  ASSERT_EQ(data.size(), 150);
  ASSERT_EQ(data.views(), 3);

  const auto masks = mvp::gen_masks(data.size(), data.views(), 0.5, 3);
  mvp::write_fingerprint(mvp::build_fingerprint(masks, 3, 0.5), dir / "fp.jsonl");
  const auto fp = mvp::read_fingerprint(dir / "fp.jsonl");
  ASSERT_EQ(fp.masks(), masks);
  data.set_masks(fp.masks());

  mvp::TrainConfig c;
  c.d = 6;
  c.k = 4;
  c.epochs = 60;
  c.warmup_epochs = 20;
  c.batch_size = 32;
  c.seed = 11;
  c.arch.encoder_hidden = {32, 32};
  c.arch.correspondence_hidden = {16};
  c.arch.decoder_hidden = {32, 32};
  auto trained = mvp::train(data, fp, c);
  ASSERT_EQ(trained.log.size(), 60u);
  EXPECT_EQ(trained.log[19].phase, "warmup");
  EXPECT_EQ(trained.log[20].phase, "main");
  for (const auto& e : trained.log) ASSERT_TRUE(std::isfinite(e.total)) << "epoch " << e.epoch;

  mvp::save_checkpoint(trained.params, c, dir / "model.ckpt");
  auto loaded = mvp::load_checkpoint(dir / "model.ckpt", data.view_dims());
  EXPECT_EQ(loaded.config, c);
  EXPECT_EQ(loaded.params.flat_values(), trained.params.flat_values());

  const mvp::Matrix emb = mvp::consensus_embedding(data, loaded.params);
  ASSERT_EQ(emb.rows(), 150);
  ASSERT_EQ(emb.cols(), 4);
  EXPECT_EQ(emb, mvp::consensus_embedding(data, trained.params));

  const auto fit = mvp::kmeans(emb, 3);
  const auto report = mvp::clustering_metrics(data.labels(), fit.assignments);
  EXPECT_GE(report.acc, 1.0 / 3.0);
  EXPECT_LE(report.acc, 1.0);
  EXPECT_GE(report.nmi, 0.0);
  EXPECT_LE(report.nmi, 1.0);
  EXPECT_GE(report.ari, -1.0);
  EXPECT_LE(report.ari, 1.0);

  const auto imp = mvp::evaluate_imputation(data, loaded.params);
  ASSERT_EQ(imp.reconstructions.size(), 3u);
  for (int v = 1; v <= 3; ++v) {
    const auto& r = imp.reconstructions[static_cast<std::size_t>(v - 1)];
    EXPECT_EQ(r.rows(), 150);
    EXPECT_EQ(r.cols(), data.view_dim(v));
    EXPECT_TRUE(r.allFinite());
  }
  EXPECT_TRUE(std::isfinite(imp.model_mse));
  EXPECT_GT(imp.baseline_mse, 0.0);
}

// Full default configuration on the standardized 3-cluster benchmark, seed 0.
TEST(Pipeline, MovingAverageOfTotalLossNeverRisesInMainPhase) {
  mvp::SyntheticConfig s;
  const auto raw = mvp::gen_synthetic(s);
  std::vector<mvp::Matrix> views;
  for (int v = 1; v <= raw.views(); ++v) {
    mvp::Matrix m = raw.view(v);
    mvp::zscore_columns(m);
    views.push_back(std::move(m));
  }
  mvp::MultiViewDataset data(std::move(views), raw.labels());
  const auto masks = mvp::gen_masks(data.size(), data.views(), 0.5, 0);
  data.set_masks(masks);
  const auto fp = mvp::build_fingerprint(masks, 0, 0.5);

  const mvp::TrainConfig c;
  const auto result = mvp::train(data, fp, c);
  ASSERT_EQ(result.log.size(), static_cast<std::size_t>(c.epochs));

  const int window = 20;
  std::vector<double> averages;
  for (int end = c.warmup_epochs + window; end <= c.epochs; ++end) {
    double sum = 0.0;
    for (int e = end - window; e < end; ++e) sum += result.log[static_cast<std::size_t>(e)].total;
    averages.push_back(sum / window);
  }
  int rises = 0;
  double worst = 0.0;
  for (std::size_t i = 1; i < averages.size(); ++i) {
    if (averages[i] > averages[i - 1]) {
      ++rises;
      worst = std::max(worst, averages[i] - averages[i - 1]);
    }
  }
  EXPECT_EQ(rises, 0) << "largest rise " << worst << " between consecutive windows; first window "
                      << averages.front() << ", last " << averages.back();
}

}  // namespace
