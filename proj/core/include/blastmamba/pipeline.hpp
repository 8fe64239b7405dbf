#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "blastmamba/config.hpp"
#include "blastmamba/dataset.hpp"
#include "blastmamba/metrics.hpp"
#include "blastmamba/network.hpp"

namespace bm::pipeline {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

inline constexpr const char* kCheckpointFile = "model.bmc";
inline constexpr const char* kLossCurveFile = "loss.csv";
inline constexpr const char* kMetricsFile = "metrics.json";

/// Writes the dataset and its manifest under out_dir.
DatasetInfo cmd_generate(const RunConfig& c, std::ostream& log);

/// Trains a fresh model on the dataset's train split with the blast input
/// forced off; writes model.bmc and loss.csv.
ModelWeights cmd_pretrain(const RunConfig& c, std::ostream& log);

/// Loads checkpoint_in, swaps in a fine-tuning head and trains with the
/// configured blast mode. Without a checkpoint, from_scratch=true is required.
ModelWeights cmd_finetune(const RunConfig& c, std::ostream& log);

/// Scores one split; writes metrics.json and predictions/<id>.pgm.
metrics::MetricsReport cmd_evaluate(const RunConfig& c, std::ostream& log);

/// Writes mask.pgm, damage.pgm and overlay.ppm for one image pair.
void cmd_predict(const RunConfig& c, std::ostream& log);

/// Dispatches on c.stage and maps exceptions to exit codes, reporting them on `err`.
int run(const RunConfig& c, std::ostream& log, std::ostream& err);

/// Overlay colours: background black, intact green, damaged yellow, destroyed red.
std::array<std::uint8_t, 3> palette_color(std::int32_t damage_class);

/// Seeds the head replaced at the start of fine-tuning.
std::uint64_t head_seed(std::uint64_t seed);

}  // namespace bm::pipeline
