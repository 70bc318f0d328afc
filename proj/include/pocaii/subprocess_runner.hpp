#pragma once

#include <mutex>
#include <string>

#include "pocaii/objective.hpp"

namespace pocaii {

//! Drives an external trainer over stdin/stdout with one JSON object per
//! line. The worker is spawned lazily via /bin/sh and restarted after any
//! transport or protocol failure; requests are answered strictly in order.
class SubprocessRunner : public ObjectiveRunner {
  public:
    SubprocessRunner(std::string command, SearchSpace space, int timeout_ms = 120000);
    ~SubprocessRunner() override;

    SubprocessRunner(const SubprocessRunner&) = delete;
    SubprocessRunner& operator=(const SubprocessRunner&) = delete;

    EvalOutcome evaluate(const EvaluationRequest& request) override;
    bool resumable() const override { return true; }

  private:
    bool spawn(std::string& why);
    void shutdown();
    bool write_line(const std::string& line, std::string& why);
    bool read_line(std::string& line, std::string& why);

    std::string command_;
    SearchSpace space_;
    int timeout_ms_;
    std::mutex mutex_;
    int child_pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string read_buffer_;
};

}  // namespace pocaii
