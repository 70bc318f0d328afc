#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "pocaii/scheduler.hpp"

namespace pocaii {

//! Append-only, line-delimited JSON record of one optimization run: a begin
//! line with the resolved experiment, one line per budget debit, phase
//! markers, and an end line. Every line carries run id, seed, algorithm and a
//! wall-clock timestamp; two runs of the same seed differ only in "ts".
class TrialLogWriter {
  public:
    //! `space` is used to name parameter values in sampled records
    TrialLogWriter(const std::filesystem::path& path, SearchSpace space, std::string run_id,
                   std::string algorithm, std::uint64_t seed, bool append = false);

    //! first line; `experiment` is the resolved config needed to resume
    void begin(nlohmann::json experiment);
    void event(const TrialEvent& ev);
    void phase_end(int iteration, const std::string& phase, long long spent);
    void end(const RunReport& report);

    //! hooks that forward scheduler events into this writer; the caller may
    //! still set stop_after_iteration on the result
    RunHooks hooks();

  private:
    void write(nlohmann::json line);

    std::ofstream out_;
    SearchSpace space_;
    std::string run_id_;
    std::string algorithm_;
    std::uint64_t seed_ = 0;
};

//! Everything a log prefix pins down. `keep_lines` is the resumable prefix:
//! records after the last completed evaluation phase belong to an interrupted
//! iteration and are re-executed rather than replayed.
struct ReplayedRun {
    nlohmann::json experiment;  // from the begin record
    std::string run_id;
    std::string algorithm;
    std::uint64_t seed = 0;
    bool completed = false;  // end record present
    std::size_t keep_lines = 0;
    PocaiiResumeState state;  // folded from the kept prefix
    long long spent = 0;      // ledger position at the kept boundary
};

//! Parse and validate a trial log. Throws std::runtime_error naming the
//! 1-based line of the first malformed record.
ReplayedRun replay_trial_log(const std::filesystem::path& path);

//! Drop everything after the resumable prefix so the continued run appends
//! from a clean phase boundary.
void truncate_trial_log(const std::filesystem::path& path, std::size_t keep_lines);

}  // namespace pocaii
