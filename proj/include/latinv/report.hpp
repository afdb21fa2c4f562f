#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "latinv/harness.hpp"

namespace latinv {

/// Files written by emit_reports. Names and CSV columns are stable.
inline constexpr const char* kConfigEchoFile = "config_echo.txt";
inline constexpr const char* kEffectiveConfigFile = "effective_config.json";
inline constexpr const char* kEpisodesFile = "episodes.csv";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kSummaryFile = "summary.json";

inline constexpr const char* kEpisodesHeader =
    "class,episode,initial_seed,reward,r1,r2,r3,episode_return,target_confidence,best_confidence,cumulative_queries";
inline constexpr const char* kMetricsHeader = "class,attack_acc,knn,feat,density,coverage,queries";

/// Writes the report file set into `dir` (created if missing). An empty
/// `effective_config` skips effective_config.json.
void emit_reports(const RunSummary& summary, const std::filesystem::path& dir,
                  const std::string& effective_config = {});

/// Parses a directory written by emit_reports back into a summary.
RunSummary load_reports(const std::filesystem::path& dir);

void write_alpha_table(const std::vector<AlphaRow>& rows, const std::filesystem::path& file);
void write_episode_table(const std::vector<EpisodeRow>& rows, const std::filesystem::path& file);

/// Side-by-side table of two runs at their respective query counts.
void write_comparison(const RunSummary& a, const RunSummary& b, const std::filesystem::path& file);

/// Human-readable digest of a summary.
std::string render_summary(const RunSummary& summary);

/// Shortest text that reads back to the same value; "nan" for NaN.
std::string format_real(double v);

}  // namespace latinv
