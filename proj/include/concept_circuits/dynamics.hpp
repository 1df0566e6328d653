#pragma once

// Learning/forgetting degrees, correlation and trajectory analyses, relatedness groups,
// interference runs and the knowledge-type transfer matrix.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "concept_circuits/concept_kb.hpp"
#include "concept_circuits/graph_metrics.hpp"
#include "concept_circuits/stats.hpp"
#include "concept_circuits/train.hpp"

namespace cc {

// ---------------------------------------------------------------------------
// Degrees

enum class DegreeKind { Learning, Forgetting };
std::string_view degree_kind_name(DegreeKind k);

/// learning = after - before; forgetting = before - after.
double knowledge_degree(double before, double after, DegreeKind kind);
/// Arithmetic mean; throws on an empty list.
double concept_degree(std::span<const double> per_triple);

struct DegreeRecord {
  int concept_id = 0;
  DegreeKind kind = DegreeKind::Learning;
  double value = 0.0;
  std::vector<int> triple_ids;
  std::vector<double> per_triple;
};

struct DegreeReport {
  DegreeKind kind = DegreeKind::Learning;
  std::vector<DegreeRecord> logit;    // one per concept, ascending id
  std::vector<DegreeRecord> logprob;  // same, on mean target log-probability
  std::vector<KnowledgeRecord> before;
  std::vector<KnowledgeRecord> after;
  int excluded_records = 0;  // UNK targets
};

/// Evaluates both checkpoints on the samples and folds per-triple degrees into concept
/// degrees. Records flagged invalid are excluded.
DegreeReport compute_degrees(const Parameters& a, const Parameters& b, const Vocabulary& vocab,
                             std::span<const Sample> samples, DegreeKind kind);
DegreeReport degrees_from_records(std::span<const KnowledgeRecord> before, std::span<const KnowledgeRecord> after,
                                  DegreeKind kind);

double mean_degree(std::span<const DegreeRecord> records);

// ---------------------------------------------------------------------------
// Circuit metric rows and correlations

struct MetricRow {
  int concept_id = 0;
  std::string checkpoint;
  int step = 0;
  MetricVector metrics;
  int k_edges = 0;
  double faithfulness = 0.0;
  bool unfaithful = false;
};

MetricRow make_metric_row(const Circuit& c, const CompGraph& graph, int step);

struct CorrelationRow {
  std::string degree;  // e.g. "learning_logit"
  std::string join;    // which checkpoint's metrics
  std::string metric;
  CorrelationResult result;
};

/// Spearman between concept degrees and each of the four metrics, joined on concept id.
std::array<CorrelationResult, 4> correlate_degrees_with_metrics(std::span<const DegreeRecord> degrees,
                                                                std::span<const MetricRow> metrics,
                                                                const SpearmanOptions& options = {});

/// Spearman between two degree lists joined on concept id.
CorrelationResult correlate_degrees(std::span<const DegreeRecord> a, std::span<const DegreeRecord> b,
                                    const SpearmanOptions& options = {});

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryPoint {
  int step = 0;
  bool present = false;  // false: no circuit for this checkpoint (recorded gap)
  MetricVector metrics;
};

struct TrajectorySeries {
  int concept_id = 0;
  std::vector<TrajectoryPoint> points;
  std::array<int, 4> peak_step{};  // step of the first maximum per metric (present points only)
};

struct TrajectorySummary {
  std::vector<int> steps;
  std::array<std::vector<double>, 4> mean_series;  // per metric, mean over present concepts
  std::array<int, 4> peak_step{};
  std::array<bool, 4> post_peak_below{};  // mean after the peak is below the peak value
};

struct TrajectoryResult {
  std::vector<TrajectorySeries> series;
  TrajectorySummary summary;
};

/// Requires >= 2 strictly increasing steps.
TrajectoryResult track_trajectories(std::span<const int> steps, std::span<const MetricRow> rows);

// ---------------------------------------------------------------------------
// Relatedness

struct RelatednessGroups {
  int target = 0;
  std::vector<int> high;
  std::vector<int> moderate;
  std::vector<int> weak;
};

/// Bag-of-(relation, object) indicator vectors, one per concept (sparse, sorted feature ids).
std::vector<std::vector<int>> concept_feature_sets(const KnowledgeBase& kb);
double cosine_sets(std::span<const int> a, std::span<const int> b);
double cosine_dense(std::span<const double> a, std::span<const double> b);

/// Dense vectors keyed by concept id: whitespace-separated `concept_id v1 v2 ...` lines.
std::map<int, std::vector<double>> read_concept_vectors(const std::filesystem::path& path);

/// Ranks every other candidate by cosine similarity to the target (descending, ties by id):
/// top-K -> high, bottom-K -> weak, K centred at the median rank -> moderate.
/// `candidates` defaults to all concepts; `vectors` switches to external embeddings.
RelatednessGroups relatedness_groups(const KnowledgeBase& kb, int target, int k,
                                     std::span<const int> candidates = {},
                                     const std::map<int, std::vector<double>>* vectors = nullptr);

/// Split a ranked list of M >= 3K candidates into the three groups.
RelatednessGroups split_ranked(int target, std::span<const int> ranked, int k);

// ---------------------------------------------------------------------------
// Interference

struct InterferenceResult {
  int target = 0;
  std::string group;
  double avg_logit = 0.0;
  double avg_prob = 0.0;
  int evaluated = 0;
  std::uint64_t seed = 0;
};

/// Trains from `base` on the target's and the group's train samples together, then
/// evaluates the target's test samples.
InterferenceResult run_interference(const Parameters& base, const Vocabulary& vocab, int target,
                                    std::span<const int> group, std::span<const Sample> train,
                                    std::span<const Sample> test, const TrainConfig& config,
                                    const std::string& group_name = "");

struct InterferenceJob {
  int target = 0;
  std::string group_name;
  std::vector<int> group;
  std::uint64_t seed = 0;
};

/// Runs independent jobs in parallel; results are in job order.
std::vector<InterferenceResult> run_interference_jobs(const Parameters& base, const Vocabulary& vocab,
                                                      std::span<const InterferenceJob> jobs,
                                                      std::span<const Sample> train, std::span<const Sample> test,
                                                      const TrainConfig& config);

struct InterferencePlan {
  std::vector<RelatednessGroups> groups;  // one per target
  std::vector<InterferenceJob> jobs;      // seed-major, then target, then group
};

/// Relatedness groups for every target and one job per (seed, target, group name). The
/// training seed depends only on the analysis seed, so groups differ only in their data.
/// Group names are "high", "moderate" and "weak".
InterferencePlan plan_interference(const KnowledgeBase& kb, std::span<const int> targets, int k,
                                   std::span<const std::string> group_names, std::span<const std::uint64_t> seeds,
                                   std::uint64_t train_seed, std::span<const int> candidates = {},
                                   const std::map<int, std::vector<double>>* vectors = nullptr);

/// Mean Jaccard between the target's circuit and each group member's circuit (members
/// without a circuit are skipped); nullopt when none are available.
std::optional<double> mean_group_jaccard(const std::map<int, Circuit>& circuits, int target,
                                         std::span<const int> group);

// ---------------------------------------------------------------------------
// Transferability

/// (logit_after_ri - logit_after_bio) / |logit_after_bio|; nullopt when the denominator is
/// below 1e-9 (undefined cell).
std::optional<double> paired_transferability(double logit_after_ri, double logit_after_bio);

struct TransferCell {
  Category source = Category::HAH;
  Category target = Category::HAH;
  double logit_after_source = 0.0;
  double logit_after_bio = 0.0;
  std::optional<double> t;
};

struct TransferMatrix {
  std::vector<TransferCell> cells;                   // 20 ordered pairs, row-major by source
  std::array<double, 5> control_logit{};             // per target category
  int control_runs = 0;
  int curriculum_runs = 0;
};

struct TransferConfig {
  TrainConfig stage1;
  TrainConfig stage2;
};

/// Stage 1 on each category's train samples (or the biography control), Stage 2 on each
/// target category, then the mean first-token logit on the target's test samples.
TransferMatrix run_transfer_matrix(const Parameters& base, const Vocabulary& vocab, std::span<const Sample> train,
                                   std::span<const Sample> test, std::span<const TokenSeq> bio,
                                   const TransferConfig& config);

// ---------------------------------------------------------------------------
// CSV reports

std::string format_double(double v);
void write_degrees_csv(const std::filesystem::path& path, const DegreeReport& report);
/// Per-triple before/after values (the degree distribution data).
void write_triple_degrees_csv(const std::filesystem::path& path, const DegreeReport& report);
/// Concept-level degrees for one measure ("logit" or "logprob") from a degrees CSV.
std::vector<DegreeRecord> read_degrees_csv(const std::filesystem::path& path, const std::string& measure);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);
void write_correlations_csv(const std::filesystem::path& path, std::span<const CorrelationRow> rows);
void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryResult& result);
void write_interference_csv(const std::filesystem::path& path, std::span<const InterferenceResult> rows);
void write_transfer_csv(const std::filesystem::path& path, const TransferMatrix& m);

}  // namespace cc
