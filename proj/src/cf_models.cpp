#include "chcf/cf_models.hpp"

#include <cmath>
#include <string>

#include "chcf/error.hpp"
#include "chcf/simd.hpp"

namespace chcf {

std::string_view to_string(ModelKind model) {
  switch (model) {
    case ModelKind::MF: return "mf";
    case ModelKind::GMF: return "gmf";
    case ModelKind::LightGCN: return "lightgcn";
  }
  return "?";
}

ModelKind parse_model(std::string_view text) {
  if (text == "mf") return ModelKind::MF;
  if (text == "gmf") return ModelKind::GMF;
  if (text == "lightgcn") return ModelKind::LightGCN;
  throw ConfigError("unknown model '" + std::string(text) + "' (valid: mf, gmf, lightgcn)");
}

CfParams init_cf_params(const CfShape& shape, Rng& rng) {
  if (shape.dim == 0) throw ConfigError("embedding size d must be at least 1");
  CfParams params;
  params.model = shape.model;
  params.layers = shape.layers;
  params.users = Matrix(shape.num_users, shape.dim);
  params.items = Matrix(shape.num_items, shape.dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.dim));
  for (double& x : params.users.flat()) x = rng.uniform(-bound, bound);
  for (double& x : params.items.flat()) x = rng.uniform(-bound, bound);
  project_rows(params.users);
  project_rows(params.items);
  if (shape.model == ModelKind::GMF) {
    if (shape.heads <= 1) {
      params.heads = Matrix(1, shape.dim, 1.0);
    } else {
      params.heads = Matrix(shape.heads, shape.dim);
      for (double& x : params.heads.flat()) x = rng.uniform(0.5, 1.5);
    }
  }
  return params;
}

Propagation::Propagation(const BehaviorDataset& train) {
  const std::size_t n_users = train.num_users;
  const std::size_t n_items = train.num_items;

  std::vector<std::vector<Index>> user_adj(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    auto& adj = user_adj[u];
    for (std::size_t k = 0; k < train.num_behaviors; ++k) {
      const auto& items = train.positives[k][u];
      adj.insert(adj.end(), items.begin(), items.end());
    }
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  std::vector<std::size_t> item_degree(n_items, 0);
  for (const auto& adj : user_adj) {
    for (Index v : adj) ++item_degree[v];
  }

  user_offsets_.assign(n_users + 1, 0);
  for (std::size_t u = 0; u < n_users; ++u) {
    user_offsets_[u + 1] = user_offsets_[u] + user_adj[u].size();
  }
  item_offsets_.assign(n_items + 1, 0);
  for (std::size_t v = 0; v < n_items; ++v) item_offsets_[v + 1] = item_offsets_[v] + item_degree[v];

  user_edges_.resize(user_offsets_.back());
  item_edges_.resize(item_offsets_.back());
  std::vector<std::size_t> item_fill(item_offsets_.begin(), item_offsets_.end() - 1);
  for (std::size_t u = 0; u < n_users; ++u) {
    const double du = static_cast<double>(user_adj[u].size());
    std::size_t pos = user_offsets_[u];
    for (Index v : user_adj[u]) {
      const double w = 1.0 / std::sqrt(du * static_cast<double>(item_degree[v]));
      user_edges_[pos++] = {v, w};
      item_edges_[item_fill[v]++] = {static_cast<Index>(u), w};
    }
  }
}

void Propagation::step(const Matrix& users, const Matrix& items, Matrix& out_users,
                       Matrix& out_items) const {
  const auto& k = simd::kernels();
  const std::size_t d = users.cols();
  out_users = Matrix(users.rows(), d);
  out_items = Matrix(items.rows(), d);
  for (std::size_t u = 0; u < num_users(); ++u) {
    if (user_offsets_[u] == user_offsets_[u + 1]) {
      std::copy_n(users.row(u).data(), d, out_users.row(u).data());
      continue;
    }
    for (std::size_t e = user_offsets_[u]; e < user_offsets_[u + 1]; ++e) {
      k.axpy(user_edges_[e].weight, items.row(user_edges_[e].to).data(), out_users.row(u).data(), d);
    }
  }
  for (std::size_t v = 0; v < num_items(); ++v) {
    if (item_offsets_[v] == item_offsets_[v + 1]) {
      std::copy_n(items.row(v).data(), d, out_items.row(v).data());
      continue;
    }
    for (std::size_t e = item_offsets_[v]; e < item_offsets_[v + 1]; ++e) {
      k.axpy(item_edges_[e].weight, users.row(item_edges_[e].to).data(), out_items.row(v).data(), d);
    }
  }
}

std::pair<Matrix, Matrix> Propagation::layer_mean(const Matrix& users, const Matrix& items,
                                                  std::size_t layers) const {
  if (users.rows() != num_users() || items.rows() != num_items()) {
    throw DataError("propagation graph does not match embedding shapes");
  }
  Matrix sum_users = users;
  Matrix sum_items = items;
  Matrix cur_users = users;
  Matrix cur_items = items;
  Matrix next_users;
  Matrix next_items;
  const auto& k = simd::kernels();
  for (std::size_t l = 0; l < layers; ++l) {
    step(cur_users, cur_items, next_users, next_items);
    k.axpy(1.0, next_users.data(), sum_users.data(), sum_users.size());
    k.axpy(1.0, next_items.data(), sum_items.data(), sum_items.size());
    std::swap(cur_users, next_users);
    std::swap(cur_items, next_items);
  }
  if (layers > 0) {
    const double scale = 1.0 / static_cast<double>(layers + 1);
    for (double& x : sum_users.flat()) x *= scale;
    for (double& x : sum_items.flat()) x *= scale;
  }
  return {std::move(sum_users), std::move(sum_items)};
}

namespace {

void check_pair(const CfParams& params, Index user, Index item) {
  if (user >= params.num_users() || item >= params.num_items()) {
    throw DataError("user/item index out of range");
  }
}

}  // namespace

double mf_score(const CfParams& params, Index user, Index item) {
  check_pair(params, user, item);
  return simd::kernels().dot(params.users.row(user).data(), params.items.row(item).data(),
                             params.dim());
}

double gmf_score(const CfParams& params, Index user, Index item, std::span<const double> mask,
                 std::size_t head) {
  check_pair(params, user, item);
  if (params.heads.empty() || head >= params.heads.rows()) {
    throw ConfigError("GMF scoring needs a prediction layer h");
  }
  const std::size_t d = params.dim();
  std::vector<double> z(d);
  const std::vector<double> ones(mask.empty() ? d : 0, 1.0);
  const double* m = mask.empty() ? ones.data() : mask.data();
  simd::kernels().mul3(params.heads.row(head).data(), params.users.row(user).data(), m, z.data(), d);
  return simd::kernels().dot(z.data(), params.items.row(item).data(), d);
}

std::pair<Matrix, Matrix> lightgcn_embed(const CfParams& params, const Propagation& graph) {
  return graph.layer_mean(params.users, params.items, params.layers);
}

double model_score(const CfParams& params, const Propagation* graph, Index user, Index item,
                   std::size_t head) {
  switch (params.model) {
    case ModelKind::MF:
      return mf_score(params, user, item);
    case ModelKind::GMF:
      return gmf_score(params, user, item, {}, head);
    case ModelKind::LightGCN: {
      if (graph == nullptr) throw ConfigError("LightGCN scoring needs the propagation graph");
      check_pair(params, user, item);
      const auto [users, items] = lightgcn_embed(params, *graph);
      return simd::kernels().dot(users.row(user).data(), items.row(item).data(), params.dim());
    }
  }
  return 0.0;
}

void project_rows(Matrix& m) {
  const auto& k = simd::kernels();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double norm = std::sqrt(k.dot(row.data(), row.data(), row.size()));
    if (norm > 1.0) {
      for (double& x : row) x /= norm;
    }
  }
}

CfParams project_embeddings(CfParams params) {
  project_rows(params.users);
  project_rows(params.items);
  return params;
}

Matrix sample_dropout_mask(std::size_t rows, std::size_t dim, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  Matrix mask(rows, dim, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (double& x : mask.flat()) x = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

ScoreBatch batch_scores(const CfParams& params, const Propagation* graph,
                        std::span<const Index> users, const Matrix* dropout) {
  const auto& k = simd::kernels();
  const std::size_t d = params.dim();
  const std::size_t n_items = params.num_items();
  ScoreBatch batch;
  batch.users.assign(users.begin(), users.end());
  for (Index u : users) {
    if (u >= params.num_users()) throw DataError("batch user index out of range");
  }
  const std::size_t b_size = users.size();

  batch.user_base = Matrix(b_size, d);
  if (params.model == ModelKind::LightGCN) {
    if (graph == nullptr) throw ConfigError("LightGCN scoring needs the propagation graph");
    auto [prop_users, prop_items] = lightgcn_embed(params, *graph);
    for (std::size_t b = 0; b < b_size; ++b) {
      std::copy_n(prop_users.row(users[b]).data(), d, batch.user_base.row(b).data());
    }
    batch.item_vectors = std::move(prop_items);
  } else {
    for (std::size_t b = 0; b < b_size; ++b) {
      std::copy_n(params.users.row(users[b]).data(), d, batch.user_base.row(b).data());
    }
    batch.item_vectors = params.items;
  }

  const std::size_t heads = params.num_heads();
  if (params.model == ModelKind::GMF) {
    if (params.heads.empty()) throw ConfigError("GMF scoring needs a prediction layer h");
    if (dropout != nullptr) {
      if (dropout->rows() != b_size || dropout->cols() != d) {
        throw ConfigError("dropout mask shape does not match the batch");
      }
      batch.dropout = *dropout;
    }
    const std::vector<double> ones(d, 1.0);
    for (std::size_t h = 0; h < heads; ++h) {
      Matrix z(b_size, d);
      for (std::size_t b = 0; b < b_size; ++b) {
        const double* m = batch.dropout.empty() ? ones.data() : batch.dropout.row(b).data();
        k.mul3(params.heads.row(h).data(), batch.user_base.row(b).data(), m, z.row(b).data(), d);
      }
      batch.user_vectors.push_back(std::move(z));
    }
  } else {
    batch.user_vectors.push_back(batch.user_base);
  }

  for (std::size_t h = 0; h < heads; ++h) {
    Matrix s(b_size, n_items);
    const Matrix& z = batch.user_vectors[h];
    for (std::size_t b = 0; b < b_size; ++b) {
      const double* zb = z.row(b).data();
      double* out = s.row(b).data();
      for (std::size_t v = 0; v < n_items; ++v) {
        out[v] = k.dot(zb, batch.item_vectors.row(v).data(), d);
      }
    }
    batch.scores.push_back(std::move(s));
  }
  return batch;
}

CfGrads zero_grads(const CfParams& params) {
  return {Matrix(params.users.rows(), params.users.cols()),
          Matrix(params.items.rows(), params.items.cols()),
          Matrix(params.heads.rows(), params.heads.cols())};
}

void backprop_scores(const CfParams& params, const Propagation* graph, const ScoreBatch& batch,
                     std::span<const Matrix> d_scores, CfGrads& grads) {
  const auto& k = simd::kernels();
  const std::size_t d = params.dim();
  const std::size_t n_items = params.num_items();
  const std::size_t b_size = batch.users.size();
  if (d_scores.size() != batch.scores.size()) {
    throw ConfigError("score gradient must have one matrix per prediction head");
  }

  Matrix d_items(n_items, d);
  Matrix d_user_vec(b_size, d);  // dL/d(user_vectors), summed over heads after the GMF layer
  Matrix d_user_base(b_size, d);
  std::vector<double> tmp(d);
  const std::vector<double> ones(d, 1.0);

  for (std::size_t h = 0; h < d_scores.size(); ++h) {
    const Matrix& ds = d_scores[h];
    const Matrix& z = batch.user_vectors[h];
    d_user_vec.fill(0.0);
    for (std::size_t b = 0; b < b_size; ++b) {
      const double* row = ds.row(b).data();
      double* dz = d_user_vec.row(b).data();
      const double* zb = z.row(b).data();
      for (std::size_t v = 0; v < n_items; ++v) {
        const double g = row[v];
        if (g == 0.0) continue;
        k.axpy(g, batch.item_vectors.row(v).data(), dz, d);
        k.axpy(g, zb, d_items.row(v).data(), d);
      }
    }
    if (params.model == ModelKind::GMF) {
      for (std::size_t b = 0; b < b_size; ++b) {
        const double* m = batch.dropout.empty() ? ones.data() : batch.dropout.row(b).data();
        k.mul3(d_user_vec.row(b).data(), params.heads.row(h).data(), m, tmp.data(), d);
        k.axpy(1.0, tmp.data(), d_user_base.row(b).data(), d);
        k.mul3(d_user_vec.row(b).data(), batch.user_base.row(b).data(), m, tmp.data(), d);
        k.axpy(1.0, tmp.data(), grads.heads.row(h).data(), d);
      }
    } else {
      k.axpy(1.0, d_user_vec.data(), d_user_base.data(), d_user_vec.size());
    }
  }

  if (params.model == ModelKind::LightGCN) {
    if (graph == nullptr) throw ConfigError("LightGCN back-propagation needs the propagation graph");
    Matrix d_prop_users(params.num_users(), d);
    for (std::size_t b = 0; b < b_size; ++b) {
      k.axpy(1.0, d_user_base.row(b).data(), d_prop_users.row(batch.users[b]).data(), d);
    }
    auto [du, dv] = graph->layer_mean(d_prop_users, d_items, params.layers);
    k.axpy(1.0, du.data(), grads.users.data(), du.size());
    k.axpy(1.0, dv.data(), grads.items.data(), dv.size());
  } else {
    for (std::size_t b = 0; b < b_size; ++b) {
      k.axpy(1.0, d_user_base.row(b).data(), grads.users.row(batch.users[b]).data(), d);
    }
    k.axpy(1.0, d_items.data(), grads.items.data(), d_items.size());
  }
}

}  // namespace chcf
