// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/external.hpp"

#include "qradapt/error.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>
#include <mutex>
#include <thread>

extern char** environ;

namespace qradapt {

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text(const char* what) {
    return std::string(what) + ": " + std::strerror(errno);
}

} // namespace

ChildProcess::ChildProcess(const std::vector<std::string>& argv) {
    if (argv.empty()) {
        throw Error("evaluator command is empty");
    }
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
        throw Error(errno_text("pipe"));
    }
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw Error(errno_text("pipe"));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<char*> args;
    for (const auto& a : argv) {
        args.push_back(const_cast<char*>(a.c_str()));
    }
    args.push_back(nullptr);
    const int rc = ::posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw Error("cannot launch evaluator '" + argv[0] + "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

ChildProcess::~ChildProcess() { terminate(); }

void ChildProcess::terminate() {
    if (to_child_ >= 0) {
        ::close(to_child_);
        to_child_ = -1;
    }
    if (from_child_ >= 0) {
        ::close(from_child_);
        from_child_ = -1;
    }
    if (pid_ > 0) {
        // Closing stdin asks a well-behaved evaluator to exit; give it a moment.
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

void ChildProcess::write_line(const std::string& line) {
    std::string payload = line + '\n';
    std::size_t written = 0;
    while (written < payload.size()) {
        const ssize_t n = ::write(to_child_, payload.data() + written, payload.size() - written);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw EvaluationError(errno_text("write to evaluator"));
        }
        written += static_cast<std::size_t>(n);
    }
}

ChildProcess::ReadStatus ChildProcess::read_line(std::string& line,
                                                 std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
            line = buffer_.substr(0, pos);
            buffer_.erase(0, pos + 1);
            return ReadStatus::line;
        }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            return ReadStatus::timeout;
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error(errno_text("poll"));
        }
        if (ready == 0) {
            return ReadStatus::timeout;
        }
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            return ReadStatus::eof;
        }
        if (n == 0) {
            return ReadStatus::eof;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::vector<std::string> split_command(const std::string& command_line) {
    std::vector<std::string> out;
    std::string current;
    bool in_token = false;
    char quote = 0;
    for (char c : command_line) {
        if (quote) {
            if (c == quote) {
                quote = 0;
            } else {
                current += c;
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
            in_token = true;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            if (in_token) {
                out.push_back(std::move(current));
                current.clear();
                in_token = false;
            }
        } else {
            current += c;
            in_token = true;
        }
    }
    if (quote) {
        throw Error("unterminated quote in evaluator command");
    }
    if (in_token) {
        out.push_back(std::move(current));
    }
    return out;
}

EvaluatorConnection::EvaluatorConnection(const std::vector<std::string>& command,
                                         std::chrono::milliseconds handshake_timeout)
    : process_(std::make_unique<ChildProcess>(command)) {
    protocol::Request hello;
    hello.type = protocol::RequestType::meta;
    const auto resp = call(hello, handshake_timeout);
    if (!resp.ok || !resp.meta) {
        throw ProtocolError("evaluator handshake failed: " + resp.error.value_or("no meta in response"));
    }
    meta_ = *resp.meta;
    meta_.geometry.validate();
}

protocol::Response EvaluatorConnection::call(protocol::Request request,
                                             std::chrono::milliseconds timeout) {
    if (!alive_) {
        throw EvaluationError("evaluator connection is closed");
    }
    request.id = next_id_++;
    process_->write_line(protocol::to_json(request).dump());

    std::string line;
    switch (process_->read_line(line, timeout)) {
    case ChildProcess::ReadStatus::timeout:
        alive_ = false;
        process_->terminate();
        throw TimeoutError("evaluator timed out after " + std::to_string(timeout.count()) + " ms");
    case ChildProcess::ReadStatus::eof:
        alive_ = false;
        process_->terminate();
        throw EvaluationError("evaluator process exited");
    case ChildProcess::ReadStatus::line:
        break;
    }
    protocol::Response resp;
    try {
        resp = protocol::parse_response_line(line);
    } catch (const ProtocolError& e) {
        std::cerr << "qradapt: protocol error (" << e.what() << "), raw payload: " << line << '\n';
        throw;
    }
    if (resp.id != request.id) {
        std::cerr << "qradapt: response id mismatch, raw payload: " << line << '\n';
        throw ProtocolError("response id " + std::to_string(resp.id) + " does not match request id " +
                            std::to_string(request.id));
    }
    return resp;
}

ExternalEvaluator::ExternalEvaluator(ExternalOptions options) : options_(std::move(options)) {
    const std::size_t n = std::max<std::size_t>(1, options_.connections);
    slots_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        slots_[i].connection =
            std::make_unique<EvaluatorConnection>(options_.command, options_.request_timeout);
        const auto& m = slots_[i].connection->meta();
        if (i == 0) {
            meta_ = m;
        } else if (m.layers != meta_.layers || m.calib_size != meta_.calib_size) {
            throw ProtocolError("evaluator processes disagree on their meta description");
        }
    }
}

ExternalEvaluator::~ExternalEvaluator() = default;

ExternalEvaluator::Slot& ExternalEvaluator::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        bool any_alive = false;
        for (auto& slot : slots_) {
            if (slot.connection && slot.connection->alive()) {
                any_alive = true;
                if (!slot.busy) {
                    slot.busy = true;
                    return slot;
                }
            }
        }
        if (!any_alive) {
            throw Error("all evaluator connections have exited");
        }
        available_.wait(lock);
    }
}

void ExternalEvaluator::release(Slot& slot) {
    {
        std::lock_guard lock(mutex_);
        slot.busy = false;
    }
    available_.notify_all();
}

protocol::Response ExternalEvaluator::dispatch(protocol::Request request,
                                               std::chrono::milliseconds timeout) {
    Slot& slot = acquire();
    try {
        auto resp = slot.connection->call(std::move(request), timeout);
        release(slot);
        return resp;
    } catch (const ProtocolError& e) {
        ++protocol_errors_;
        release(slot);
        throw EvaluationError(std::string("protocol error: ") + e.what());
    } catch (const TimeoutError&) {
        // The process was alive but slow: start a fresh one in its place.
        std::unique_ptr<EvaluatorConnection> fresh;
        try {
            fresh = std::make_unique<EvaluatorConnection>(options_.command, options_.request_timeout);
        } catch (const std::exception& restart) {
            std::cerr << "qradapt: evaluator restart failed: " << restart.what() << '\n';
        }
        if (fresh) {
            std::lock_guard lock(mutex_);
            slot.connection = std::move(fresh);
        }
        release(slot);
        throw;
    } catch (...) {
        release(slot);
        throw;
    }
}

double ExternalEvaluator::evaluate(const ModelConfig& config, int proxy_steps) {
    protocol::Request req;
    req.type = protocol::RequestType::evaluate;
    req.config = config;
    req.proxy_steps = proxy_steps;
    const auto resp = dispatch(std::move(req), options_.evaluate_timeout);
    if (!resp.ok) {
        throw EvaluationError("evaluator error: " + resp.error.value_or("unspecified"));
    }
    if (!resp.performance) {
        ++protocol_errors_;
        throw EvaluationError("protocol error: evaluate response without performance");
    }
    return *resp.performance;
}

std::vector<double> ExternalEvaluator::distribution(std::size_t calib_index,
                                                    std::optional<std::size_t> layer,
                                                    std::optional<int> bit) {
    protocol::Request req;
    req.type = protocol::RequestType::distribution;
    req.calib_index = calib_index;
    req.layer = layer;
    req.bit = bit;
    const auto resp = dispatch(std::move(req), options_.request_timeout);
    if (!resp.ok) {
        throw EvaluationError("evaluator error: " + resp.error.value_or("unspecified"));
    }
    if (!resp.dist) {
        ++protocol_errors_;
        throw EvaluationError("protocol error: distribution response without dist");
    }
    return *resp.dist;
}

std::size_t ExternalEvaluator::live_connections() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& slot : slots_) {
        n += slot.connection && slot.connection->alive() ? 1 : 0;
    }
    return n;
}

std::size_t ExternalEvaluator::max_concurrency() const { return std::max<std::size_t>(1, live_connections()); }

} // namespace qradapt
