#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "chcf/cf_models.hpp"
#include "chcf/criterion.hpp"
#include "chcf/data.hpp"
#include "chcf/matrix.hpp"

namespace chcf {

/// Denominator floor of the normalized prediction score.
inline constexpr double kScoreFloor = kBoundFloor * kBoundFloor;

/// Target-behavior prediction R(u,v) / (H(u,K) * G(v,K)). Caches the
/// propagated or GMF-weighted user vectors once so full-ranking evaluation
/// only pays a dot product per (user, item).
class Predictor {
 public:
  Predictor(const CfParams& params, const Propagation* graph, const CriterionParams& cp);

  std::size_t num_users() const { return user_vectors_.rows(); }
  std::size_t num_items() const { return item_vectors_.rows(); }

  double likelihood(Index user, Index item) const;
  double score(Index user, Index item) const;
  /// Normalized scores of `user` against every item.
  void score_row(Index user, std::span<double> out) const;

 private:
  Matrix user_vectors_;
  Matrix item_vectors_;
  std::vector<double> user_bound_;  // H(:, K)
  std::vector<double> item_bound_;  // G(:, K)
};

double predict_score(const CfParams& params, const Propagation* graph, const CriterionParams& cp,
                     Index user, Index item);

/// Top-`n` items for `user` among V minus its target-behavior training
/// positives, by descending score; ties go to the smaller item index.
std::vector<Index> rank_user(const Predictor& predictor, Index user, const BehaviorDataset& train,
                             std::size_t n);

/// Full 1-based rank of each user's held-out item among its candidates.
using UserRanks = std::map<Index, std::size_t>;

/// Throws DataError if a held-out user has no entry in `ranks`.
double hr_at_n(const UserRanks& ranks, const HeldOut& held_out, std::size_t n);
double ndcg_at_n(const UserRanks& ranks, const HeldOut& held_out, std::size_t n);

struct RankingReport {
  std::vector<std::size_t> cutoffs;
  std::map<std::size_t, double> hr;
  std::map<std::size_t, double> ndcg;
  std::map<Index, std::size_t> per_user_rank;  // only ranks within max(cutoffs)

  friend bool operator==(const RankingReport&, const RankingReport&) = default;
};

inline const std::vector<std::size_t> kDefaultCutoffs{10, 50, 100, 200};

RankingReport make_report(const UserRanks& ranks, const HeldOut& held_out,
                          std::span<const std::size_t> cutoffs);

/// Rank of the held-out item by counting the candidates that beat it: one
/// pass over the row, no sort.
std::size_t held_out_rank(std::span<const double> scores, const std::vector<Index>& excluded,
                          Index held_out_item);

RankingReport evaluate(const Predictor& predictor, const BehaviorDataset& train,
                       const HeldOut& held_out, std::span<const std::size_t> cutoffs);

/// Same as `evaluate` over an explicit |U| x |V| score table.
RankingReport metrics_from_scores(const Matrix& scores, const BehaviorDataset& train,
                                  const HeldOut& held_out, std::span<const std::size_t> cutoffs);

/// Test oracle: sorts every user's full candidate list and applies the
/// general DCG formula with its ideal-DCG normalizer.
RankingReport brute_force_metrics(const Matrix& scores, const BehaviorDataset& train,
                                  const HeldOut& held_out, std::span<const std::size_t> cutoffs);

/// Writes `<stem>.txt` (aligned table) and `<stem>.kv` (key=value), values
/// at 6 decimals.
void write_report(const std::filesystem::path& stem, const RankingReport& report);
std::string format_report(const RankingReport& report);

}  // namespace chcf
