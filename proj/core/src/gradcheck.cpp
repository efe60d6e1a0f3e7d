#include "mvp/gradcheck.hpp"

#include "mvp/errors.hpp"

namespace mvp {

ModelGradCheckResult check_model_gradients(const ModelGradCheckConfig& c) {
  require(c.views >= 2, "gradcheck: at least 2 views required");
  require(c.samples >= 1 && c.hidden >= 1 && c.view_dim >= 1, "gradcheck: sizes must be positive");
  Architecture arch;
  arch.encoder_hidden = {c.hidden};
  arch.correspondence_hidden = {c.hidden};
  arch.decoder_hidden = {c.hidden};
  ModelParams model(ModelDims{std::vector<Index>(static_cast<std::size_t>(c.views), c.view_dim), c.d, c.k},
                    arch, c.seed);

  Rng rng = Rng(c.seed).split();
  const int L = c.views;
  std::vector<SampleViews> samples;
  std::vector<Mask> masks;
  std::vector<std::vector<Permutation>> columns;
  std::vector<SampleNoise> noise;
  for (int s = 0; s < c.samples; ++s) {
    SampleViews x;
    for (int v = 0; v < L; ++v) {
      Vector col(c.view_dim);
      for (Index i = 0; i < c.view_dim; ++i) col[i] = rng.normal();
      x.push_back(std::move(col));
    }
    Mask m(static_cast<std::size_t>(L), 1);
    if (s > 0) {
      const auto keep = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(L)));
      for (int v = 0; v < L; ++v) m[static_cast<std::size_t>(v)] = (v == keep || rng.uniform() < 0.5) ? 1 : 0;
    }
    const ViewSet obs = observed_views(m);
    std::vector<Permutation> cols;
    if (c.prior_mode == PriorMode::random_perm) {
      for (int l = 0; l < L; ++l) cols.push_back(random_permutation(L, obs, rng));
    } else {
      cols = make_bundle(L, obs, rng).permutations();
    }
    samples.push_back(std::move(x));
    masks.push_back(std::move(m));
    columns.push_back(std::move(cols));
    noise.push_back(draw_sample_noise(L, c.d, c.k, obs, rng));
  }
  std::vector<BatchItem> batch;
  for (int s = 0; s < c.samples; ++s) {
    const auto i = static_cast<std::size_t>(s);
    batch.push_back(BatchItem{&samples[i], masks[i], columns[i], &noise[i]});
  }

  ObjectiveConfig objective;
  objective.prior_mode = c.prior_mode;
  model.zero_grad();
  evaluate_batch(model, batch, c.kind, objective, true);
  const std::vector<double> analytic = model.flat_gradients();
  std::vector<double> values = model.flat_values();

  auto loss = [&]() {
    model.set_flat_values(values);
    return evaluate_batch(model, batch, c.kind, objective, false).total;
  };
  ModelGradCheckResult result;
  result.report = grad_check(loss, values, analytic, c.h, c.tolerance, c.abs_floor);
  model.set_flat_values(values);
  result.worst_path = model.parameter_path(result.report.worst_index);
  result.parameters = values.size();
  return result;
}

}  // namespace mvp
