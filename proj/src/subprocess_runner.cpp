#include "pocaii/subprocess_runner.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace pocaii {

SubprocessRunner::SubprocessRunner(std::string command, SearchSpace space, int timeout_ms)
    : command_(std::move(command)), space_(std::move(space)), timeout_ms_(timeout_ms) {
    if (command_.empty()) throw std::invalid_argument("SubprocessRunner: empty command");
    if (auto err = validate(space_)) throw std::invalid_argument("SubprocessRunner: " + *err);
}

SubprocessRunner::~SubprocessRunner() { shutdown(); }

bool SubprocessRunner::spawn(std::string& why) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) {
        why = std::string("pipe: ") + std::strerror(errno);
        return false;
    }
    if (pipe(from_child) != 0) {
        why = std::string("pipe: ") + std::strerror(errno);
        close(to_child[0]);
        close(to_child[1]);
        return false;
    }
    const int pid = fork();
    if (pid < 0) {
        why = std::string("fork: ") + std::strerror(errno);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        return false;
    }
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    child_pid_ = pid;
    to_child_ = to_child[1];
    from_child_ = from_child[0];
    read_buffer_.clear();
    return true;
}

void SubprocessRunner::shutdown() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    to_child_ = from_child_ = -1;
    if (child_pid_ > 0) {
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (waitpid(child_pid_, &status, WNOHANG) != 0) {
                child_pid_ = -1;
                return;
            }
            usleep(10000);
        }
        kill(child_pid_, SIGKILL);
        waitpid(child_pid_, &status, 0);
        child_pid_ = -1;
    }
}

bool SubprocessRunner::write_line(const std::string& line, std::string& why) {
    std::string framed = line + "\n";
    std::size_t off = 0;
    while (off < framed.size()) {
        const ssize_t n = write(to_child_, framed.data() + off, framed.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            why = std::string("worker write failed: ") + std::strerror(errno);
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

bool SubprocessRunner::read_line(std::string& line, std::string& why) {
    while (true) {
        const auto pos = read_buffer_.find('\n');
        if (pos != std::string::npos) {
            line = read_buffer_.substr(0, pos);
            read_buffer_.erase(0, pos + 1);
            return true;
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int pr = poll(&pfd, 1, timeout_ms_);
        if (pr == 0) {
            why = "worker timed out after " + std::to_string(timeout_ms_) + " ms";
            return false;
        }
        if (pr < 0) {
            if (errno == EINTR) continue;
            why = std::string("poll: ") + std::strerror(errno);
            return false;
        }
        char buf[4096];
        const ssize_t n = read(from_child_, buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) continue;
            why = std::string("worker read failed: ") + std::strerror(errno);
            return false;
        }
        if (n == 0) {
            int status = 0;
            waitpid(child_pid_, &status, 0);
            child_pid_ = -1;
            if (WIFEXITED(status))
                why = "worker exited with code " + std::to_string(WEXITSTATUS(status));
            else if (WIFSIGNALED(status))
                why = "worker killed by signal " + std::to_string(WTERMSIG(status));
            else
                why = "worker closed its output stream";
            return false;
        }
        read_buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

EvalOutcome SubprocessRunner::evaluate(const EvaluationRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string why;
    if (child_pid_ < 0 && !spawn(why)) return EvalOutcome::failure(why);

    if (!write_line(encode_request(request, space_), why)) {
        shutdown();
        return EvalOutcome::failure(why);
    }
    std::string line;
    if (!read_line(line, why)) {
        shutdown();
        return EvalOutcome::failure(why);
    }
    EvalOutcome out = decode_response(line, request);
    if (!out.ok) shutdown();  // protocol out of sync; restart on next call
    return out;
}

}  // namespace pocaii
