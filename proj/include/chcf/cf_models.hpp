#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "chcf/data.hpp"
#include "chcf/matrix.hpp"
#include "chcf/rng.hpp"

namespace chcf {

enum class ModelKind { MF, GMF, LightGCN };

std::string_view to_string(ModelKind model);
/// Accepts "mf", "gmf", "lightgcn" (case-sensitive). Throws ConfigError.
ModelKind parse_model(std::string_view text);

/// Learnable parameters of the collaborative-filtering scorer. Every row of
/// `users` and `items` stays inside the unit ball between optimizer steps.
struct CfParams {
  ModelKind model = ModelKind::GMF;
  Matrix users;  // |U| x d
  Matrix items;  // |V| x d
  // GMF prediction layers, one row per head. A single row is shared by all
  // behaviors; K rows give every behavior its own layer. Empty for MF and
  // LightGCN.
  Matrix heads;
  std::size_t layers = 3;  // LightGCN propagation depth

  std::size_t dim() const { return users.cols(); }
  std::size_t num_users() const { return users.rows(); }
  std::size_t num_items() const { return items.rows(); }
  std::size_t num_heads() const { return model == ModelKind::GMF ? heads.rows() : 1; }

  friend bool operator==(const CfParams&, const CfParams&) = default;
};

struct CfShape {
  ModelKind model = ModelKind::GMF;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t dim = 64;
  std::size_t layers = 3;
  std::size_t heads = 1;  // >1 only for per-behavior GMF layers
};

/// Embedding entries uniform in [-1/sqrt(d), 1/sqrt(d)] then projected.
/// A shared GMF head starts at all-ones; per-behavior heads are drawn
/// independently from [0.5, 1.5).
CfParams init_cf_params(const CfShape& shape, Rng& rng);

/// Symmetrically normalized user-item bipartite adjacency built from the
/// union of every behavior's positives. A node without edges keeps its own
/// embedding at every layer.
class Propagation {
 public:
  explicit Propagation(const BehaviorDataset& train);

  std::size_t num_users() const { return user_offsets_.size() - 1; }
  std::size_t num_items() const { return item_offsets_.size() - 1; }
  std::size_t num_edges() const { return user_edges_.size(); }

  /// One step of the normalized adjacency on the stacked (users; items) matrix.
  void step(const Matrix& users, const Matrix& items, Matrix& out_users, Matrix& out_items) const;

  /// (1 / (L + 1)) * sum_{l=0..L} A^l E. The operator is symmetric, so the
  /// same call back-propagates gradients.
  std::pair<Matrix, Matrix> layer_mean(const Matrix& users, const Matrix& items,
                                       std::size_t layers) const;

 private:
  struct Edge {
    Index to;
    double weight;
  };
  std::vector<std::size_t> user_offsets_;
  std::vector<Edge> user_edges_;
  std::vector<std::size_t> item_offsets_;
  std::vector<Edge> item_edges_;
};

double mf_score(const CfParams& params, Index user, Index item);

/// h^T (p_u * q_v * mask). `mask` holds {0, 1/(1-rho)} entries; empty means
/// all-ones. Throws ConfigError when the parameters carry no prediction layer.
double gmf_score(const CfParams& params, Index user, Index item,
                 std::span<const double> mask = {}, std::size_t head = 0);

/// Propagated (users, items) embeddings for LightGCN scoring.
std::pair<Matrix, Matrix> lightgcn_embed(const CfParams& params, const Propagation& graph);

/// Pointwise score for any model kind (no dropout).
double model_score(const CfParams& params, const Propagation* graph, Index user, Index item,
                   std::size_t head = 0);

/// Every row with Euclidean norm above 1 is scaled back onto the unit sphere.
void project_rows(Matrix& m);
CfParams project_embeddings(CfParams params);

/// Inverted-dropout mask, one row per batch user.
Matrix sample_dropout_mask(std::size_t rows, std::size_t dim, double rate, Rng& rng);

/// Scores for a batch of users against every item, plus the forward state
/// needed to back-propagate into the parameters.
struct ScoreBatch {
  std::vector<Index> users;
  std::vector<Matrix> scores;  // one B x |V| matrix per head

  std::vector<Matrix> user_vectors;  // per head, B x d, dotted with item_vectors
  Matrix user_base;                  // B x d user embeddings before the GMF layer
  Matrix item_vectors;               // |V| x d
  Matrix dropout;                    // B x d, empty unless training GMF

  /// Score matrix used by behavior k (shared when there is a single head).
  const Matrix& for_behavior(std::size_t k) const {
    return scores[std::min(k, scores.size() - 1)];
  }
};

/// `graph` is required for LightGCN. `dropout` (B x d) only affects GMF.
ScoreBatch batch_scores(const CfParams& params, const Propagation* graph,
                        std::span<const Index> users, const Matrix* dropout = nullptr);

struct CfGrads {
  Matrix users;
  Matrix items;
  Matrix heads;
};

CfGrads zero_grads(const CfParams& params);

/// Accumulates dL/dparams given dL/dscores (one matrix per head, same shape
/// as batch.scores).
void backprop_scores(const CfParams& params, const Propagation* graph, const ScoreBatch& batch,
                     std::span<const Matrix> d_scores, CfGrads& grads);

}  // namespace chcf
