#include "cfts/bridge.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <optional>
#include <thread>

#include <json.hpp>

namespace cfts {

const char* to_string(BridgeErrorKind kind) {
  switch (kind) {
    case BridgeErrorKind::Spawn: return "spawn failure";
    case BridgeErrorKind::HandshakeTimeout: return "handshake timeout";
    case BridgeErrorKind::DeclarationMismatch: return "declaration mismatch";
    case BridgeErrorKind::ChildExited: return "child exited";
    case BridgeErrorKind::Protocol: return "protocol error";
    case BridgeErrorKind::Timeout: return "request timeout";
    case BridgeErrorKind::IdMismatch: return "id mismatch";
    case BridgeErrorKind::WrongLength: return "wrong score length";
    case BridgeErrorKind::NonFinite: return "non-finite score";
    case BridgeErrorKind::Remote: return "model error";
  }
  return "error";
}

namespace {

using Clock = std::chrono::steady_clock;

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::string truncate_line(const std::string& line) {
  constexpr std::size_t kMax = 200;
  return line.size() <= kMax ? line : line.substr(0, kMax) + "...";
}

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "signal " + std::to_string(WTERMSIG(status));
  return "unknown status";
}

}  // namespace

struct BridgeScorer::Impl {
  BridgeConfig config;
  ModelShape shape;
  pid_t pid = -1;
  Fd to_child;
  Fd from_child;
  std::string buffer;
  std::int64_t next_id = 0;
  std::optional<int> exit_status;
  std::optional<BridgeError> broken;

  // FIFO admission: each caller takes a ticket and waits for its turn.
  std::mutex mutex;
  std::condition_variable turn;
  std::uint64_t next_ticket = 0;
  std::uint64_t serving = 0;

  ~Impl() { shutdown(); }

  std::string exit_description() {
    if (!exit_status && pid > 0) {
      int status = 0;
      if (::waitpid(pid, &status, WNOHANG) == pid) exit_status = status;
    }
    return exit_status ? describe_status(*exit_status) : std::string("still running");
  }

  // Reads one line; returns nullopt on timeout. Throws ChildExited on EOF.
  std::optional<std::string> read_line(Clock::time_point deadline) {
    while (true) {
      auto nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (remaining <= 0) return std::nullopt;
      pollfd pfd{from_child.get(), POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(remaining, 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(BridgeErrorKind::ChildExited, std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(from_child.get(), chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw BridgeError(BridgeErrorKind::ChildExited, std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        // Give the child a moment to be reaped so the status is reportable.
        for (int i = 0; i < 50 && !exit_status; ++i) {
          exit_description();
          if (!exit_status) std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        throw BridgeError(BridgeErrorKind::ChildExited, "child closed its output (" + exit_description() + ")");
      }
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void write_all(const std::string& data, Clock::time_point deadline) {
    std::size_t off = 0;
    while (off < data.size()) {
      const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (remaining <= 0) throw BridgeError(BridgeErrorKind::Timeout, "timed out writing request");
      pollfd pfd{to_child.get(), POLLOUT, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(remaining, 1 << 30)));
      if (rc < 0 && errno != EINTR) {
        throw BridgeError(BridgeErrorKind::ChildExited, std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc <= 0) continue;
      const ssize_t n = ::send(to_child.get(), data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw BridgeError(BridgeErrorKind::ChildExited,
                          std::string("write failed: ") + std::strerror(errno) + " (" + exit_description() + ")");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void spawn() {
    if (config.command.empty()) throw BridgeError(BridgeErrorKind::Spawn, "empty command");
    int in_pair[2];
    int out_pair[2];
    int err_pipe[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0 ||
        ::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, out_pair) != 0 ||
        ::pipe2(err_pipe, O_CLOEXEC) != 0) {
      throw BridgeError(BridgeErrorKind::Spawn, std::string("cannot create pipes: ") + std::strerror(errno));
    }
    Fd parent_in(in_pair[0]), child_in(in_pair[1]);
    Fd parent_out(out_pair[0]), child_out(out_pair[1]);
    Fd err_read(err_pipe[0]), err_write(err_pipe[1]);

    std::vector<char*> argv;
    for (auto& arg : config.command) argv.push_back(arg.data());
    argv.push_back(nullptr);

    const pid_t child = ::fork();
    if (child < 0) throw BridgeError(BridgeErrorKind::Spawn, std::string("fork failed: ") + std::strerror(errno));
    if (child == 0) {
      ::dup2(child_in.get(), STDIN_FILENO);
      ::dup2(child_out.get(), STDOUT_FILENO);
      ::execvp(argv[0], argv.data());
      const int err = errno;
      [[maybe_unused]] auto ignored = ::write(err_write.get(), &err, sizeof(err));
      ::_exit(127);
    }
    pid = child;
    child_in.reset();
    child_out.reset();
    err_write.reset();
    int err = 0;
    ssize_t n;
    do {
      n = ::read(err_read.get(), &err, sizeof(err));
    } while (n < 0 && errno == EINTR);
    if (n == static_cast<ssize_t>(sizeof(err))) {
      int status = 0;
      ::waitpid(pid, &status, 0);
      pid = -1;
      throw BridgeError(BridgeErrorKind::Spawn, "cannot execute '" + config.command.front() + "': " + std::strerror(err));
    }
    to_child = std::move(parent_in);
    from_child = std::move(parent_out);
  }

  void handshake(const ModelShape& expected) {
    const auto deadline = Clock::now() + std::chrono::milliseconds(config.startup_timeout_ms);
    std::optional<std::string> line;
    try {
      line = read_line(deadline);
    } catch (const BridgeError& e) {
      throw BridgeError(BridgeErrorKind::ChildExited, std::string("before handshake: ") + e.what());
    }
    if (!line) {
      throw BridgeError(BridgeErrorKind::HandshakeTimeout,
                        "no hello line within " + std::to_string(config.startup_timeout_ms) + " ms");
    }
    nlohmann::json hello;
    try {
      hello = nlohmann::json::parse(*line);
      if (!hello.is_object() || hello.value("type", "") != "hello") throw std::runtime_error("not a hello message");
      shape.class_count = hello.at("class_count").get<std::size_t>();
      shape.variables = hello.at("variables").get<std::size_t>();
      shape.timesteps = hello.at("timesteps").get<std::size_t>();
    } catch (const std::exception& e) {
      throw BridgeError(BridgeErrorKind::Protocol, "malformed hello line '" + truncate_line(*line) + "': " + e.what());
    }
    std::string mismatch;
    auto compare = [&mismatch](const char* what, std::size_t got, std::size_t want) {
      if (got != want) {
        if (!mismatch.empty()) mismatch += ", ";
        mismatch += std::string(what) + " " + std::to_string(got) + " (expected " + std::to_string(want) + ")";
      }
    };
    compare("class_count", shape.class_count, expected.class_count);
    compare("variables", shape.variables, expected.variables);
    compare("timesteps", shape.timesteps, expected.timesteps);
    if (!mismatch.empty()) throw BridgeError(BridgeErrorKind::DeclarationMismatch, "child declared " + mismatch);
  }

  std::vector<ScoreVector> request(std::span<const MultivariateSeries> batch) {
    if (broken) throw *broken;
    if (!to_child) throw BridgeError(BridgeErrorKind::ChildExited, "bridge is closed");
    const std::int64_t id = next_id++;
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : batch) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t v = 0; v < s.variable_count(); ++v) {
        auto r = s.row(v);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      samples.push_back(std::move(rows));
    }
    nlohmann::json req = {{"type", "predict"}, {"id", id}, {"samples", std::move(samples)}};
    const auto deadline = Clock::now() + std::chrono::milliseconds(config.request_timeout_ms);
    try {
      write_all(req.dump() + "\n", deadline);
      auto line = read_line(deadline);
      if (!line) {
        throw BridgeError(BridgeErrorKind::Timeout, "no response to request " + std::to_string(id) + " within " +
                                                        std::to_string(config.request_timeout_ms) + " ms");
      }
      return parse_response(*line, id, batch.size());
    } catch (const BridgeError& e) {
      if (e.kind() != BridgeErrorKind::Remote) broken = e;
      throw;
    }
  }

  std::vector<ScoreVector> parse_response(const std::string& line, std::int64_t id, std::size_t batch_size) {
    nlohmann::json resp;
    std::string type;
    std::int64_t resp_id = -1;
    try {
      resp = nlohmann::json::parse(line);
      type = resp.at("type").get<std::string>();
      resp_id = resp.at("id").get<std::int64_t>();
    } catch (const std::exception& e) {
      throw BridgeError(BridgeErrorKind::Protocol, "malformed response line '" + truncate_line(line) + "': " + e.what());
    }
    if (resp_id != id) {
      throw BridgeError(BridgeErrorKind::IdMismatch,
                        "request " + std::to_string(id) + " answered with id " + std::to_string(resp_id));
    }
    if (type == "error") {
      std::string message = resp.value("message", std::string("(no message)"));
      throw BridgeError(BridgeErrorKind::Remote, message);
    }
    if (type != "scores") {
      throw BridgeError(BridgeErrorKind::Protocol, "unexpected message type '" + type + "'");
    }
    const auto it = resp.find("scores");
    if (it == resp.end() || !it->is_array()) {
      throw BridgeError(BridgeErrorKind::Protocol, "response " + std::to_string(id) + " has no scores array");
    }
    if (it->size() != batch_size) {
      throw BridgeError(BridgeErrorKind::WrongLength, "response " + std::to_string(id) + " has " +
                                                          std::to_string(it->size()) + " score vectors for " +
                                                          std::to_string(batch_size) + " samples");
    }
    std::vector<ScoreVector> out;
    out.reserve(batch_size);
    for (const auto& sv : *it) {
      if (!sv.is_array() || sv.size() != shape.class_count) {
        throw BridgeError(BridgeErrorKind::WrongLength, "score vector of length " +
                                                            std::to_string(sv.is_array() ? sv.size() : 0) +
                                                            ", expected " + std::to_string(shape.class_count));
      }
      ScoreVector scores;
      scores.reserve(sv.size());
      for (const auto& x : sv) {
        // Protocol encoders write NaN/Infinity as null; treat any non-number as non-finite.
        if (!x.is_number() || !std::isfinite(x.get<double>())) {
          throw BridgeError(BridgeErrorKind::NonFinite, "response " + std::to_string(id) + " contains " + x.dump());
        }
        scores.push_back(x.get<double>());
      }
      out.push_back(std::move(scores));
    }
    return out;
  }

  void shutdown() {
    to_child.reset();
    if (pid <= 0) return;
    if (!exit_status) {
      const auto deadline = Clock::now() + std::chrono::milliseconds(config.startup_timeout_ms);
      while (Clock::now() < deadline) {
        int status = 0;
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) {
          exit_status = status;
          break;
        }
        if (r < 0) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
      if (!exit_status) {
        ::kill(pid, SIGKILL);
        int status = 0;
        if (::waitpid(pid, &status, 0) == pid) exit_status = status;
      }
    }
    from_child.reset();
    pid = -1;
  }
};

BridgeScorer::BridgeScorer(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

BridgeScorer::~BridgeScorer() = default;

std::shared_ptr<BridgeScorer> BridgeScorer::open(const BridgeConfig& config, const ModelShape& expected) {
  if (config.startup_timeout_ms <= 0 || config.request_timeout_ms <= 0) {
    throw ConfigError("bridge timeouts must be positive");
  }
  auto impl = std::make_unique<Impl>();
  impl->config = config;
  impl->spawn();
  impl->handshake(expected);
  return std::shared_ptr<BridgeScorer>(new BridgeScorer(std::move(impl)));
}

std::size_t BridgeScorer::class_count() const { return impl_->shape.class_count; }
std::size_t BridgeScorer::variable_count() const { return impl_->shape.variables; }
std::size_t BridgeScorer::timesteps() const { return impl_->shape.timesteps; }
int BridgeScorer::child_pid() const { return impl_->pid; }

std::vector<ScoreVector> BridgeScorer::score(std::span<const MultivariateSeries> batch) const {
  Impl& impl = *impl_;
  std::unique_lock lock(impl.mutex);
  const std::uint64_t ticket = impl.next_ticket++;
  impl.turn.wait(lock, [&] { return impl.serving == ticket; });
  lock.unlock();
  struct Advance {
    Impl& impl;
    ~Advance() {
      {
        std::lock_guard guard(impl.mutex);
        ++impl.serving;
      }
      impl.turn.notify_all();
    }
  } advance{impl};
  return impl.request(batch);
}

void BridgeScorer::close() {
  Impl& impl = *impl_;
  std::unique_lock lock(impl.mutex);
  const std::uint64_t ticket = impl.next_ticket++;
  impl.turn.wait(lock, [&] { return impl.serving == ticket; });
  impl.shutdown();
  ++impl.serving;
  impl.turn.notify_all();
}

Classifier bridge_open(const BridgeConfig& config, const ModelShape& expected, PredictionRule rule) {
  return Classifier(BridgeScorer::open(config, expected), std::move(rule));
}

std::vector<std::string> split_command_line(const std::string& line) {
  std::vector<std::string> out;
  std::string current;
  bool in_token = false;
  char quote = 0;
  for (char ch : line) {
    if (quote) {
      if (ch == quote) {
        quote = 0;
      } else {
        current += ch;
      }
    } else if (ch == '\'' || ch == '"') {
      quote = ch;
      in_token = true;
    } else if (ch == ' ' || ch == '\t' || ch == '\n') {
      if (in_token) out.push_back(std::move(current));
      current.clear();
      in_token = false;
    } else {
      current += ch;
      in_token = true;
    }
  }
  if (quote) throw ConfigError("unterminated quote in command line");
  if (in_token) out.push_back(std::move(current));
  return out;
}

}  // namespace cfts
