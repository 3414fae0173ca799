#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "preddiff/model.hpp"

extern char** environ;

// Client side of the JSON Lines worker protocol, version 1:
//
//   worker -> {"preddiff_bridge":1,"task":"regression","n_features":F,"n_outputs":O}
//   client -> {"id":k,"inputs":[[...],...]}
//   worker -> {"id":k,"outputs":[[...],...]}   or   {"id":k,"error":"msg"}
//
// One request is in flight per connection; BridgeModel spreads a batch over
// several identical workers.

namespace preddiff {

struct BridgeOptions {
  std::chrono::milliseconds timeout{30000};
  /// Width the caller's data has; a different hello is a schema error.
  std::optional<std::size_t> expect_features;
};

struct BridgeHello {
  TaskKind task = TaskKind::regression;
  std::size_t n_features = 0;
  std::size_t n_outputs = 0;
};

namespace detail {

inline void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

inline std::string shorten(std::string_view line, std::size_t limit = 200) {
  if (line.size() <= limit) return std::string(line);
  return std::string(line.substr(0, limit)) + "...";
}

/// Encodes one request line (without the trailing newline).
inline std::string encode_request(std::uint64_t id, const RowMatrix& rows) {
  std::string out = "{\"id\":" + std::to_string(id) + ",\"inputs\":[";
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    if (r) out.push_back(',');
    out.push_back('[');
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (c) out.push_back(',');
      out += format_number(rows(r, c));
    }
    out.push_back(']');
  }
  out += "]}";
  return out;
}

inline BridgeHello parse_hello(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("malformed hello line: " + shorten(line));
  }
  const auto bad = [&](const std::string& what) {
    return ProtocolError("invalid hello (" + what + "): " + shorten(line));
  };
  if (!j.is_object()) throw bad("not an object");
  const auto version = j.find("preddiff_bridge");
  if (version == j.end() || !version->is_number_integer()) throw bad("no protocol version");
  if (version->get<long long>() != 1) {
    throw bad("unsupported protocol version " + version->dump());
  }
  BridgeHello hello;
  const auto task = j.find("task");
  if (task == j.end() || !task->is_string()) throw bad("no task");
  try {
    hello.task = parse_task_kind(task->get<std::string>());
  } catch (const Error&) {
    throw bad("unknown task");
  }
  for (const char* key : {"n_features", "n_outputs"}) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number_unsigned() || it->get<std::size_t>() == 0) {
      throw bad(std::string(key) + " must be a positive integer");
    }
  }
  hello.n_features = j["n_features"].get<std::size_t>();
  hello.n_outputs = j["n_outputs"].get<std::size_t>();
  if (hello.task == TaskKind::regression && hello.n_outputs != 1) {
    throw bad("regression workers have exactly one output");
  }
  return hello;
}

/// Decodes a response line for request `id` with the expected shape.
inline RowMatrix decode_response(const std::string& line, std::uint64_t id,
                                 Eigen::Index rows, Eigen::Index cols) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("malformed response line: " + shorten(line));
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer()) {
    throw ProtocolError("response without an integer id: " + shorten(line));
  }
  if (j["id"].get<long long>() != static_cast<long long>(id)) {
    throw ProtocolError("response id " + j["id"].dump() + " does not match request id " +
                        std::to_string(id));
  }
  if (const auto err = j.find("error"); err != j.end()) {
    throw ModelError("worker failed request " + std::to_string(id) + ": " +
                     (err->is_string() ? err->get<std::string>() : err->dump()));
  }
  const auto outputs = j.find("outputs");
  if (outputs == j.end() || !outputs->is_array()) {
    throw ProtocolError("response has neither outputs nor error: " + shorten(line));
  }
  if (static_cast<Eigen::Index>(outputs->size()) != rows) {
    throw ProtocolError("response has " + std::to_string(outputs->size()) +
                        " rows, expected " + std::to_string(rows));
  }
  RowMatrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = (*outputs)[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ProtocolError("response row " + std::to_string(r) + " has the wrong shape, expected " +
                          std::to_string(cols) + " values");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw ProtocolError("response row " + std::to_string(r) + " holds a non-number");
      }
      out(r, c) = v.get<double>();
    }
  }
  return out;
}

/// A spawned worker with pipes on its standard streams.
class WorkerProcess {
 public:
  WorkerProcess(const std::string& command, std::chrono::milliseconds timeout)
      : command_(command), timeout_(timeout) {
    ignore_sigpipe_once();
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) sys_fail("pipe");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      close_pair(in_pipe);
      sys_fail("pipe");
    }
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
      close_pair(in_pipe);
      close_pair(out_pipe);
      sys_fail("pipe");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], 0);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], 1);
    posix_spawn_file_actions_adddup2(&actions, err_pipe[1], 2);
    const std::string script = "exec " + command;
    const char* argv[] = {"/bin/sh", "-c", script.c_str(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr,
                                 const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    err_child_ = err_pipe[0];
    if (rc != 0) {
      close_fds();
      throw TransportError("cannot spawn worker '" + command + "': " + std::strerror(rc));
    }
    ::fcntl(to_child_, F_SETFL, ::fcntl(to_child_, F_GETFL) | O_NONBLOCK);
    ::fcntl(err_child_, F_SETFL, ::fcntl(err_child_, F_GETFL) | O_NONBLOCK);
  }

  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  ~WorkerProcess() {
    if (to_child_ >= 0) {
      ::close(to_child_);
      to_child_ = -1;
    }
    if (pid_ > 0 && !reaped_) {
      // Give a conforming worker a moment to exit on EOF, then kill it.
      for (int i = 0; i < 50 && !try_reap(); ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      if (!reaped_) {
        ::kill(pid_, SIGKILL);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        reaped_ = true;
      }
    }
    close_fds();
  }

  /// Next stdout line without the newline.
  std::string read_line(std::string_view waiting_for) {
    check_usable();
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      if (const auto nl = out_buf_.find('\n'); nl != std::string::npos) {
        std::string line = out_buf_.substr(0, nl);
        out_buf_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      pollfd fds[2] = {{from_child_, POLLIN, 0}, {err_child_, POLLIN, 0}};
      const int n = wait(fds, 2, deadline, waiting_for);
      if (n == 0) continue;
      if (fds[1].revents) drain_stderr();
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[65536];
        const ssize_t got = ::read(from_child_, buf, sizeof buf);
        if (got > 0) {
          out_buf_.append(buf, static_cast<std::size_t>(got));
        } else if (got == 0) {
          died("worker closed its output while " + std::string(waiting_for));
        } else if (errno != EINTR && errno != EAGAIN) {
          sys_fail("read");
        }
      }
    }
  }

  void write_line(const std::string& line) {
    check_usable();
    const std::string data = line + "\n";
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::size_t sent = 0;
    while (sent < data.size()) {
      pollfd fds[2] = {{to_child_, POLLOUT, 0}, {err_child_, POLLIN, 0}};
      wait(fds, 2, deadline, "sending a request");
      if (fds[1].revents) drain_stderr();
      if (fds[0].revents & (POLLERR | POLLHUP)) died("worker closed its input");
      if (fds[0].revents & POLLOUT) {
        const ssize_t put = ::write(to_child_, data.data() + sent, data.size() - sent);
        if (put > 0) {
          sent += static_cast<std::size_t>(put);
        } else if (put < 0 && errno == EPIPE) {
          died("worker closed its input");
        } else if (put < 0 && errno != EINTR && errno != EAGAIN) {
          sys_fail("write");
        }
      }
    }
  }

  [[nodiscard]] const std::string& stderr_text() const { return err_buf_; }
  [[nodiscard]] const std::string& command() const { return command_; }

  /// Marks the connection unusable after a failure that left it out of sync.
  void poison() { broken_ = true; }

 private:
  static void close_pair(int p[2]) {
    ::close(p[0]);
    ::close(p[1]);
  }

  [[noreturn]] static void sys_fail(const char* what) {
    throw TransportError(std::string(what) + " failed: " + std::strerror(errno));
  }

  void close_fds() {
    for (int* fd : {&to_child_, &from_child_, &err_child_}) {
      if (*fd >= 0) ::close(*fd);
      *fd = -1;
    }
  }

  void check_usable() const {
    if (broken_) {
      throw TransportError("worker '" + command_ + "' is unusable after an earlier failure");
    }
  }

  int wait(pollfd* fds, nfds_t count, std::chrono::steady_clock::time_point deadline,
           std::string_view waiting_for) {
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        broken_ = true;
        throw TransportError("worker timed out after " +
                             std::to_string(timeout_.count()) + " ms while " +
                             std::string(waiting_for) + with_stderr());
      }
      const int n = ::poll(fds, count, static_cast<int>(left.count()));
      if (n >= 0) return n;
      if (errno != EINTR) sys_fail("poll");
    }
  }

  void drain_stderr() {
    if (err_child_ < 0) return;
    char buf[4096];
    for (;;) {
      const ssize_t got = ::read(err_child_, buf, sizeof buf);
      if (got > 0) {
        // Keep the tail only; workers may log without bound.
        err_buf_.append(buf, static_cast<std::size_t>(got));
        if (err_buf_.size() > 16384) err_buf_.erase(0, err_buf_.size() - 16384);
        continue;
      }
      if (got == 0) {
        ::close(err_child_);
        err_child_ = -1;
      }
      return;
    }
  }

  bool try_reap() {
    if (reaped_) return true;
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      reaped_ = true;
      status_ = status;
    }
    return reaped_;
  }

  std::string with_stderr() const {
    if (err_buf_.empty()) return "";
    std::string text = err_buf_;
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return "; worker stderr: " + text;
  }

  [[noreturn]] void died(const std::string& what) {
    broken_ = true;
    // Collect whatever the worker said before exiting.
    const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
    while (err_child_ >= 0 && std::chrono::steady_clock::now() < until) {
      pollfd fd{err_child_, POLLIN, 0};
      if (::poll(&fd, 1, 50) > 0) drain_stderr();
    }
    for (int i = 0; i < 50 && !try_reap(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    std::string status;
    if (reaped_ && WIFEXITED(status_)) {
      status = " (exit status " + std::to_string(WEXITSTATUS(status_)) + ")";
    } else if (reaped_ && WIFSIGNALED(status_)) {
      status = " (killed by signal " + std::to_string(WTERMSIG(status_)) + ")";
    }
    throw TransportError(what + status + with_stderr());
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int err_child_ = -1;
  std::string out_buf_;
  std::string err_buf_;
  bool broken_ = false;
  bool reaped_ = false;
  int status_ = 0;
};

}  // namespace detail

/// One worker process; requests are serialized on this connection.
class BridgeConnection {
 public:
  BridgeConnection(const std::string& command, const BridgeOptions& options = {})
      : process_(command, options.timeout) {
    hello_ = detail::parse_hello(process_.read_line("waiting for the hello line"));
    if (options.expect_features && *options.expect_features != hello_.n_features) {
      throw SchemaError("worker declares " + std::to_string(hello_.n_features) +
                        " features but the data has " +
                        std::to_string(*options.expect_features) + " columns");
    }
  }

  [[nodiscard]] const BridgeHello& hello() const { return hello_; }
  [[nodiscard]] const std::string& stderr_text() const { return process_.stderr_text(); }

  RowMatrix request(const RowMatrix& rows) {
    std::lock_guard lock(mutex_);
    const std::uint64_t id = next_id_++;
    process_.write_line(detail::encode_request(id, rows));
    const std::string line = process_.read_line("waiting for response " + std::to_string(id));
    try {
      return detail::decode_response(line, id, rows.rows(),
                                     static_cast<Eigen::Index>(hello_.n_outputs));
    } catch (const ProtocolError&) {
      process_.poison();
      throw;
    }
  }

 private:
  detail::WorkerProcess process_;
  BridgeHello hello_;
  std::mutex mutex_;
  std::uint64_t next_id_ = 0;
};

/// Model backed by one or more identical worker processes.
///
/// A batch is split into contiguous chunks, one per worker, sent in parallel.
class BridgeModel final : public Model {
 public:
  static std::unique_ptr<BridgeModel> spawn(const std::string& command,
                                            std::size_t workers = 1,
                                            const BridgeOptions& options = {}) {
    if (workers == 0) throw DomainError("bridge needs at least one worker");
    std::vector<std::unique_ptr<BridgeConnection>> pool;
    for (std::size_t i = 0; i < workers; ++i) {
      pool.push_back(std::make_unique<BridgeConnection>(command, options));
      const BridgeHello& h = pool.back()->hello();
      const BridgeHello& first = pool.front()->hello();
      if (h.task != first.task || h.n_features != first.n_features ||
          h.n_outputs != first.n_outputs) {
        throw ProtocolError("bridge workers disagree in their hello lines");
      }
    }
    return std::unique_ptr<BridgeModel>(new BridgeModel(std::move(pool)));
  }

  [[nodiscard]] std::size_t n_workers() const { return pool_.size(); }
  [[nodiscard]] const BridgeConnection& connection(std::size_t i) const { return *pool_.at(i); }

 protected:
  RowMatrix do_predict(const RowMatrix& rows) const override {
    const auto n = rows.rows();
    const auto k = static_cast<Eigen::Index>(n_outputs());
    const auto used = std::min<Eigen::Index>(static_cast<Eigen::Index>(pool_.size()), n);
    if (used <= 1) return pool_.front()->request(rows);

    RowMatrix out(n, k);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(used));
    std::vector<std::thread> threads;
    const Eigen::Index chunk = (n + used - 1) / used;
    for (Eigen::Index w = 0; w < used; ++w) {
      const Eigen::Index start = w * chunk;
      const Eigen::Index len = std::min(chunk, n - start);
      if (len <= 0) break;
      threads.emplace_back([&, w, start, len] {
        try {
          out.middleRows(start, len) =
              pool_[static_cast<std::size_t>(w)]->request(rows.middleRows(start, len));
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    return out;
  }

 private:
  explicit BridgeModel(std::vector<std::unique_ptr<BridgeConnection>> pool)
      : Model(pool.front()->hello().task, pool.front()->hello().n_features,
              pool.front()->hello().n_outputs),
        pool_(std::move(pool)) {}

  std::vector<std::unique_ptr<BridgeConnection>> pool_;
};

}  // namespace preddiff
