#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unsee/encoder/vocab.hpp"
#include "unsee/evaluation/sts.hpp"
#include "unsee/training/config.hpp"

namespace unsee {

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  std::optional<double> loss_inv, loss_var, loss_cov;
  double spearman = 0.0;
  double effective_rank = 0.0;
  double mean_dim_std = 0.0;
  double mean_pairwise_cosine = 0.0;  // not part of the CSV
};

struct TrainReport {
  std::vector<MetricsRow> rows;
  std::size_t total_steps = 0;
  std::size_t best_step = 0;
  double best_spearman = -2.0;
  std::optional<std::filesystem::path> checkpoint_path;
  bool aborted = false;  // non-finite loss; the last row is the diagnostics row
  std::size_t abort_step = 0;
  std::string abort_reason;
  Model final_model;
  Vocab vocab;
};

inline constexpr std::string_view kMetricsHeader =
    "step,loss,loss_inv,loss_var,loss_cov,spearman,effective_rank,mean_dim_std";

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);
std::string metrics_csv(std::span<const MetricsRow> rows);

enum class TraceEvent { Forward, Loss, Backward, AdamStep, EmaUpdate, Evaluate, Checkpoint };

struct TrainHooks {
  std::function<void(TraceEvent, std::size_t step)> trace;
  bool skip_ema = false;
};

struct TrainInputs {
  std::span<const std::string> corpus;
  std::span<const LabeledPair> dev;
  std::optional<Vocab> vocab;                  // built from the corpus when absent
  std::optional<std::filesystem::path> out_dir;  // best.ckpt + vocab.txt go here
};

// Step indices floor(i * total / eval_count), i = 1..eval_count, deduplicated.
std::vector<std::size_t> evaluation_steps(std::size_t total_steps, std::size_t eval_count);

Model init_model(const TrainConfig& cfg, std::size_t vocab_size);

// Seeded training loop: per-epoch shuffle, forward_pair -> objective ->
// backward -> Adam -> EMA, dev evaluation at evaluation_steps, best-model
// checkpointing. A non-finite loss stops the run (report.aborted).
TrainReport train(const TrainConfig& cfg, const TrainInputs& inputs, const TrainHooks& hooks = {});

}  // namespace unsee
