#include "chcf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "chcf/error.hpp"
#include "chcf/simd.hpp"

namespace chcf {

Predictor::Predictor(const CfParams& params, const Propagation* graph, const CriterionParams& cp) {
  if (cp.user_bounds.rows() != params.num_users() || cp.item_bounds.rows() != params.num_items() ||
      cp.num_behaviors() == 0) {
    throw DataError("criterion parameters do not match the model shape");
  }
  const std::size_t d = params.dim();
  switch (params.model) {
    case ModelKind::MF:
      user_vectors_ = params.users;
      item_vectors_ = params.items;
      break;
    case ModelKind::GMF: {
      if (params.heads.empty()) throw ConfigError("GMF scoring needs a prediction layer h");
      // The last head belongs to the target behavior when heads are per behavior.
      const auto head = params.heads.row(params.heads.rows() - 1);
      const std::vector<double> ones(d, 1.0);
      user_vectors_ = Matrix(params.num_users(), d);
      for (std::size_t u = 0; u < params.num_users(); ++u) {
        simd::kernels().mul3(head.data(), params.users.row(u).data(), ones.data(),
                             user_vectors_.row(u).data(), d);
      }
      item_vectors_ = params.items;
      break;
    }
    case ModelKind::LightGCN: {
      if (graph == nullptr) throw ConfigError("LightGCN scoring needs the propagation graph");
      auto [users, items] = lightgcn_embed(params, *graph);
      user_vectors_ = std::move(users);
      item_vectors_ = std::move(items);
      break;
    }
  }
  const std::size_t target = cp.num_behaviors() - 1;
  user_bound_.resize(cp.user_bounds.rows());
  item_bound_.resize(cp.item_bounds.rows());
  for (std::size_t u = 0; u < user_bound_.size(); ++u) user_bound_[u] = cp.user_bounds(u, target);
  for (std::size_t v = 0; v < item_bound_.size(); ++v) item_bound_[v] = cp.item_bounds(v, target);
}

double Predictor::likelihood(Index user, Index item) const {
  if (user >= num_users() || item >= num_items()) throw DataError("user/item index out of range");
  return simd::kernels().dot(user_vectors_.row(user).data(), item_vectors_.row(item).data(),
                             user_vectors_.cols());
}

double Predictor::score(Index user, Index item) const {
  return likelihood(user, item) / std::max(user_bound_[user] * item_bound_[item], kScoreFloor);
}

void Predictor::score_row(Index user, std::span<double> out) const {
  if (user >= num_users() || out.size() != num_items()) throw DataError("bad score row request");
  const auto& k = simd::kernels();
  const double* z = user_vectors_.row(user).data();
  const double hu = user_bound_[user];
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v] = k.dot(z, item_vectors_.row(v).data(), user_vectors_.cols()) /
             std::max(hu * item_bound_[v], kScoreFloor);
  }
}

double predict_score(const CfParams& params, const Propagation* graph, const CriterionParams& cp,
                     Index user, Index item) {
  return Predictor(params, graph, cp).score(user, item);
}

namespace {

// Descending score, then ascending item index.
bool ranks_before(double score_a, Index a, double score_b, Index b) {
  return score_a > score_b || (score_a == score_b && a < b);
}

}  // namespace

std::vector<Index> rank_user(const Predictor& predictor, Index user, const BehaviorDataset& train,
                             std::size_t n) {
  std::vector<double> scores(predictor.num_items());
  predictor.score_row(user, scores);
  const auto& excluded = train.positives[train.target()][user];
  std::vector<Index> candidates;
  candidates.reserve(scores.size());
  std::size_t next = 0;
  for (Index v = 0; v < scores.size(); ++v) {
    if (next < excluded.size() && excluded[next] == v) {
      ++next;
      continue;
    }
    candidates.push_back(v);
  }
  const std::size_t keep = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(),
                    [&](Index a, Index b) { return ranks_before(scores[a], a, scores[b], b); });
  candidates.resize(keep);
  return candidates;
}

double hr_at_n(const UserRanks& ranks, const HeldOut& held_out, std::size_t n) {
  if (held_out.empty()) return 0.0;
  double hits = 0.0;
  for (const auto& [user, item] : held_out) {
    const auto it = ranks.find(user);
    if (it == ranks.end()) throw DataError("no rank for user " + std::to_string(user));
    if (it->second <= n) hits += 1.0;
  }
  return hits / static_cast<double>(held_out.size());
}

double ndcg_at_n(const UserRanks& ranks, const HeldOut& held_out, std::size_t n) {
  if (held_out.empty()) return 0.0;
  double gain = 0.0;
  for (const auto& [user, item] : held_out) {
    const auto it = ranks.find(user);
    if (it == ranks.end()) throw DataError("no rank for user " + std::to_string(user));
    if (it->second <= n) gain += 1.0 / std::log2(static_cast<double>(it->second) + 1.0);
  }
  return gain / static_cast<double>(held_out.size());
}

RankingReport make_report(const UserRanks& ranks, const HeldOut& held_out,
                          std::span<const std::size_t> cutoffs) {
  RankingReport report;
  report.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  std::size_t max_n = 0;
  for (std::size_t n : cutoffs) {
    report.hr[n] = hr_at_n(ranks, held_out, n);
    report.ndcg[n] = ndcg_at_n(ranks, held_out, n);
    max_n = std::max(max_n, n);
  }
  for (const auto& [user, item] : held_out) {
    const std::size_t rank = ranks.at(user);
    if (rank <= max_n) report.per_user_rank[user] = rank;
  }
  return report;
}

std::size_t held_out_rank(std::span<const double> scores, const std::vector<Index>& excluded,
                          Index held_out_item) {
  if (held_out_item >= scores.size()) throw DataError("held-out item out of range");
  const double target = scores[held_out_item];
  std::size_t better = 0;
  std::size_t next = 0;
  for (Index v = 0; v < scores.size(); ++v) {
    if (next < excluded.size() && excluded[next] == v) {
      ++next;
      continue;
    }
    if (v != held_out_item && ranks_before(scores[v], v, target, held_out_item)) ++better;
  }
  return better + 1;
}

RankingReport evaluate(const Predictor& predictor, const BehaviorDataset& train,
                       const HeldOut& held_out, std::span<const std::size_t> cutoffs) {
  UserRanks ranks;
  std::vector<double> scores(predictor.num_items());
  for (const auto& [user, item] : held_out) {
    predictor.score_row(user, scores);
    ranks[user] = held_out_rank(scores, train.positives[train.target()][user], item);
  }
  return make_report(ranks, held_out, cutoffs);
}

RankingReport metrics_from_scores(const Matrix& scores, const BehaviorDataset& train,
                                  const HeldOut& held_out, std::span<const std::size_t> cutoffs) {
  UserRanks ranks;
  for (const auto& [user, item] : held_out) {
    ranks[user] = held_out_rank(scores.row(user), train.positives[train.target()][user], item);
  }
  return make_report(ranks, held_out, cutoffs);
}

RankingReport brute_force_metrics(const Matrix& scores, const BehaviorDataset& train,
                                  const HeldOut& held_out, std::span<const std::size_t> cutoffs) {
  RankingReport report;
  report.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  const std::size_t max_n = cutoffs.empty() ? 0 : *std::max_element(cutoffs.begin(), cutoffs.end());
  std::map<Index, std::vector<Index>> ranked;
  for (const auto& [user, item] : held_out) {
    std::vector<Index> list;
    for (Index v = 0; v < scores.cols(); ++v) {
      if (v == item || !train.contains(train.target(), user, v)) list.push_back(v);
    }
    std::sort(list.begin(), list.end(), [&](Index a, Index b) {
      return ranks_before(scores(user, a), a, scores(user, b), b);
    });
    const auto pos = std::find(list.begin(), list.end(), item);
    const std::size_t rank = static_cast<std::size_t>(pos - list.begin()) + 1;
    if (rank <= max_n) report.per_user_rank[user] = rank;
    ranked.emplace(user, std::move(list));
  }
  const double users = static_cast<double>(held_out.size());
  for (std::size_t n : cutoffs) {
    double hit_sum = 0.0;
    double dcg_sum = 0.0;
    for (const auto& [user, item] : held_out) {
      const auto& list = ranked.at(user);
      const std::size_t top = std::min(n, list.size());
      std::size_t overlap = 0;
      double dcg = 0.0;
      for (std::size_t i = 1; i <= top; ++i) {
        const int relevant = list[i - 1] == item ? 1 : 0;
        overlap += static_cast<std::size_t>(relevant);
        dcg += (std::pow(2.0, relevant) - 1.0) / std::log2(static_cast<double>(i) + 1.0);
      }
      // Ideal DCG with a single relevant item sits at position 1.
      const double ideal = 1.0 / std::log2(2.0);
      hit_sum += overlap > 0 ? 1.0 : 0.0;
      dcg_sum += dcg / ideal;
    }
    report.hr[n] = held_out.empty() ? 0.0 : hit_sum / users;
    report.ndcg[n] = held_out.empty() ? 0.0 : dcg_sum / users;
  }
  return report;
}

std::string format_report(const RankingReport& report) {
  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof line, "%-8s %10s %10s\n", "N", "HR", "NDCG");
  out << line;
  for (std::size_t n : report.cutoffs) {
    std::snprintf(line, sizeof line, "%-8zu %10.6f %10.6f\n", n, report.hr.at(n), report.ndcg.at(n));
    out << line;
  }
  return out.str();
}

void write_report(const std::filesystem::path& stem, const RankingReport& report) {
  {
    std::ofstream out(stem.string() + ".txt");
    if (!out) throw DataError("cannot write " + stem.string() + ".txt");
    out << format_report(report);
  }
  std::ofstream out(stem.string() + ".kv");
  if (!out) throw DataError("cannot write " + stem.string() + ".kv");
  char line[96];
  for (std::size_t n : report.cutoffs) {
    std::snprintf(line, sizeof line, "hr@%zu=%.6f\nndcg@%zu=%.6f\n", n, report.hr.at(n), n,
                  report.ndcg.at(n));
    out << line;
  }
}

}  // namespace chcf
