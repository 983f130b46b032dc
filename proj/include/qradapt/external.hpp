// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/evaluator.hpp"
#include "qradapt/protocol.hpp"

#include <sys/types.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace qradapt {

/// A child process with its stdin and stdout connected to pipes.
class ChildProcess {
public:
    explicit ChildProcess(const std::vector<std::string>& argv);
    ~ChildProcess();

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    enum class ReadStatus { line, timeout, eof };

    // Throws EvaluationError if the child has closed its end.
    void write_line(const std::string& line);
    ReadStatus read_line(std::string& line, std::chrono::milliseconds timeout);

    void terminate();
    pid_t pid() const { return pid_; }

private:
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

struct ExternalOptions {
    std::vector<std::string> command;
    std::chrono::milliseconds evaluate_timeout{600'000};
    // Applies to meta and distribution requests.
    std::chrono::milliseconds request_timeout{60'000};
    std::size_t connections = 1;
};

/// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command(const std::string& command_line);

/// One evaluator process; one request in flight at a time.
class EvaluatorConnection {
public:
    EvaluatorConnection(const std::vector<std::string>& command,
                        std::chrono::milliseconds handshake_timeout);

    const EvaluatorMeta& meta() const { return meta_; }
    bool alive() const { return alive_; }

    /// Sends `request` (its id is assigned here) and waits for the matching
    /// response. Timeouts (TimeoutError) and child exit (EvaluationError)
    /// leave the connection dead; malformed responses throw ProtocolError.
    protocol::Response call(protocol::Request request, std::chrono::milliseconds timeout);

private:
    std::unique_ptr<ChildProcess> process_;
    std::uint64_t next_id_ = 1;
    std::atomic<bool> alive_{true};
    EvaluatorMeta meta_;
};

/// Evaluator backed by a pool of external processes speaking the wire
/// protocol. A connection that times out is restarted; one whose process
/// exits is retired and the pool continues on the rest.
class ExternalEvaluator final : public Evaluator {
public:
    explicit ExternalEvaluator(ExternalOptions options);
    ~ExternalEvaluator() override;

    EvaluatorMeta meta() const override { return meta_; }
    double evaluate(const ModelConfig& config, int proxy_steps) override;
    std::vector<double> distribution(std::size_t calib_index, std::optional<std::size_t> layer,
                                     std::optional<int> bit) override;
    std::size_t max_concurrency() const override;

    std::size_t live_connections() const;
    std::size_t protocol_errors() const { return protocol_errors_; }

private:
    struct Slot {
        std::unique_ptr<EvaluatorConnection> connection;
        bool busy = false;
    };

    protocol::Response dispatch(protocol::Request request, std::chrono::milliseconds timeout);
    Slot& acquire();
    void release(Slot& slot);

    ExternalOptions options_;
    EvaluatorMeta meta_;
    mutable std::mutex mutex_;
    std::condition_variable available_;
    std::vector<Slot> slots_;
    std::atomic<std::size_t> protocol_errors_{0};
};

} // namespace qradapt
