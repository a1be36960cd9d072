#include <gtest/gtest.h>

#include <cmath>

#include "chcf/cf_models.hpp"
#include "chcf/error.hpp"
#include "support.hpp"

using namespace chcf;
using namespace chcf::testing_support;

namespace {

CfParams explicit_params(ModelKind model, std::vector<std::vector<double>> users,
                         std::vector<std::vector<double>> items) {
  CfParams p;
  p.model = model;
  const std::size_t d = users.front().size();
  p.users = Matrix(users.size(), d);
  p.items = Matrix(items.size(), d);
  for (std::size_t r = 0; r < users.size(); ++r)
    std::copy(users[r].begin(), users[r].end(), p.users.row(r).begin());
  for (std::size_t r = 0; r < items.size(); ++r)
    std::copy(items[r].begin(), items[r].end(), p.items.row(r).begin());
  if (model == ModelKind::GMF) p.heads = Matrix(1, d, 1.0);
  return p;
}

double row_norm(const Matrix& m, std::size_t r) {
  double s = 0.0;
  for (double x : m.row(r)) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(ModelKind, ParseRoundTrip) {
  for (ModelKind m : {ModelKind::MF, ModelKind::GMF, ModelKind::LightGCN}) {
    EXPECT_EQ(parse_model(to_string(m)), m);
  }
  EXPECT_THROW(parse_model("MF"), ConfigError);
}

TEST(MfScore, Examples) {
  const CfParams p = explicit_params(ModelKind::MF, {{1, 0, 0}, {0.5, 0.5, 0}},
                                     {{1, 0, 0}, {0, 1, 0}, {1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0}});
  EXPECT_EQ(mf_score(p, 0, 0), 1.0);
  EXPECT_EQ(mf_score(p, 0, 1), 0.0);
  EXPECT_NEAR(mf_score(p, 1, 2), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(mf_score(p, 2, 0), DataError);
}

TEST(GmfScore, Examples) {
  CfParams p = explicit_params(ModelKind::GMF, {{1, 1}}, {{1, 0.5}, {1, 0}});
  EXPECT_EQ(gmf_score(p, 0, 1), 1.0);
  const std::vector<double> zeros(2, 0.0);
  EXPECT_EQ(gmf_score(p, 0, 0, zeros), 0.0);
  p.heads(0, 1) = 2.0;
  EXPECT_EQ(gmf_score(p, 0, 0), 2.0);  // 1*1*1 + 2*1*0.5
  p.heads = Matrix();
  EXPECT_THROW(gmf_score(p, 0, 0), ConfigError);
}

TEST(LightGcn, SingleEdgeOneLayer) {
  BehaviorDataset ds;
  ds.num_users = 1;
  ds.num_items = 1;
  ds.num_behaviors = 1;
  ds.positives = {{{0}}};
  const Propagation graph(ds);
  CfParams p = explicit_params(ModelKind::LightGCN, {{0.2, -0.4}}, {{0.6, 0.1}});
  p.layers = 1;
  const auto [users, items] = lightgcn_embed(p, graph);
  EXPECT_NEAR(users(0, 0), 0.4, 1e-15);
  EXPECT_NEAR(users(0, 1), -0.15, 1e-15);
  EXPECT_NEAR(items(0, 0), 0.4, 1e-15);
}

TEST(LightGcn, IsolatedUserKeepsItsEmbedding) {
  Rng rng(1);
  BehaviorDataset ds = random_dataset(rng, 4, 5, 2, 0.5);
  for (auto& per_user : ds.positives) per_user[2].clear();
  const Propagation graph(ds);
  CfParams p = init_cf_params({ModelKind::LightGCN, 4, 5, 6, 3, 1}, rng);
  const auto [users, items] = lightgcn_embed(p, graph);
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(users(2, c), p.users(2, c));
}

TEST(Identities, GmfOnesAndLightGcnZeroLayersMatchMf) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const BehaviorDataset ds = random_dataset(rng, 6, 9, 3, 0.3);
    CfParams mf = init_cf_params({ModelKind::MF, 6, 9, 8, 0, 1}, rng);
    CfParams gmf = mf;
    gmf.model = ModelKind::GMF;
    gmf.heads = Matrix(1, 8, 1.0);
    CfParams gcn = mf;
    gcn.model = ModelKind::LightGCN;
    gcn.layers = 0;
    const Propagation graph(ds);
    for (Index u = 0; u < 6; ++u) {
      for (Index v = 0; v < 9; ++v) {
        const double ref = mf_score(mf, u, v);
        EXPECT_NEAR(gmf_score(gmf, u, v), ref, 1e-12);
        EXPECT_NEAR(model_score(gcn, &graph, u, v), ref, 1e-12);
      }
    }
  }
}

TEST(BatchScores, MatchesPointwiseForEveryModel) {
  Rng rng(3);
  const BehaviorDataset ds = random_dataset(rng, 7, 11, 3, 0.3);
  const Propagation graph(ds);
  const std::vector<Index> users{6, 1, 1, 3};
  for (ModelKind m : {ModelKind::MF, ModelKind::GMF, ModelKind::LightGCN}) {
    CfParams p = init_cf_params({m, 7, 11, 5, 2, 1}, rng);
    if (m == ModelKind::GMF) {
      for (double& x : p.heads.flat()) x = rng.uniform(0.5, 1.5);
    }
    const ScoreBatch batch = batch_scores(p, &graph, users);
    ASSERT_EQ(batch.scores.size(), 1u);
    for (std::size_t b = 0; b < users.size(); ++b) {
      for (Index v = 0; v < 11; ++v) {
        EXPECT_NEAR(batch.scores[0](b, v), model_score(p, &graph, users[b], v), 1e-12);
      }
    }
  }
}

TEST(BatchScores, BasisSelection) {
  const CfParams p = explicit_params(ModelKind::MF, {{0, 1, 0}}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const std::vector<Index> users{0};
  const ScoreBatch batch = batch_scores(p, nullptr, users);
  EXPECT_EQ(batch.scores[0](0, 0), 0.0);
  EXPECT_EQ(batch.scores[0](0, 1), 1.0);
  EXPECT_EQ(batch.scores[0](0, 2), 0.0);
}

TEST(BatchScores, DropoutMaskMatchesPointwise) {
  Rng rng(4);
  CfParams p = init_cf_params({ModelKind::GMF, 3, 4, 6, 0, 1}, rng);
  const std::vector<Index> users{2, 0};
  const Matrix mask = sample_dropout_mask(2, 6, 0.5, rng);
  const ScoreBatch batch = batch_scores(p, nullptr, users, &mask);
  for (std::size_t b = 0; b < 2; ++b) {
    for (Index v = 0; v < 4; ++v) {
      EXPECT_NEAR(batch.scores[0](b, v), gmf_score(p, users[b], v, mask.row(b)), 1e-12);
    }
  }
  for (double x : mask.flat()) EXPECT_TRUE(x == 0.0 || x == 2.0);
}

TEST(Projection, Examples) {
  CfParams p = explicit_params(ModelKind::MF, {{2, 0}, {0.3, 0}, {0, 0}}, {{1.2, 1.6}});
  const CfParams once = project_embeddings(p);
  EXPECT_EQ(once.users(0, 0), 1.0);
  EXPECT_EQ(once.users(1, 0), 0.3);
  EXPECT_EQ(once.users(2, 0), 0.0);
  EXPECT_NEAR(row_norm(once.items, 0), 1.0, 1e-15);
  EXPECT_NEAR(once.items(0, 0) / once.items(0, 1), 0.75, 1e-15);
  EXPECT_EQ(project_embeddings(once), once);
}

TEST(Init, RowsInsideUnitBall) {
  Rng rng(5);
  const CfParams p = init_cf_params({ModelKind::GMF, 50, 40, 64, 0, 3}, rng);
  EXPECT_EQ(p.num_heads(), 3u);
  for (std::size_t r = 0; r < 50; ++r) EXPECT_LE(row_norm(p.users, r), 1.0 + 1e-12);
  for (double x : p.heads.flat()) {
    EXPECT_GE(x, 0.5);
    EXPECT_LT(x, 1.5);
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  Rng rng(6);
  struct Case {
    ModelKind model;
    std::size_t layers;
  };
  for (Case c : {Case{ModelKind::MF, 0}, Case{ModelKind::GMF, 0}, Case{ModelKind::LightGCN, 0},
                 Case{ModelKind::LightGCN, 1}, Case{ModelKind::LightGCN, 3}}) {
    for (DecoratedFn g : {DecoratedFn::Linear, DecoratedFn::Square, DecoratedFn::ExpM1}) {
      for (int point = 0; point < 3; ++point) {
        GradProblem p = random_grad_problem(rng, c.model, c.layers, g);
        std::string worst;
        const double err = max_relative_error(p, 1e-5, 1e-6, &worst);
        EXPECT_LT(err, 1e-4) << to_string(c.model) << " L=" << c.layers << " g=" << to_string(g)
                             << " worst " << worst;
      }
    }
  }
}

TEST(Gradients, PerBehaviorHeadsRegressionPath) {
  Rng rng(7);
  GradProblem p = random_grad_problem(rng, ModelKind::GMF, 0, DecoratedFn::Square);
  p.params.heads = Matrix(3, p.params.dim());
  for (double& x : p.params.heads.flat()) x = rng.uniform(0.5, 1.5);
  p.cfg.form = LossForm::Regression;
  p.cfg.bound_mode = BoundMode::Fixed;
  EXPECT_LT(max_relative_error(p), 1e-4);
  p.cfg.bound_mode = BoundMode::Learned;
  EXPECT_LT(max_relative_error(p), 1e-4);
}
