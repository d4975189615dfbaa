#include "kbsa/external_model.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "json.hpp"
#include "kbsa/errors.hpp"

namespace kbsa {

using nlohmann::json;

class ExternalModel::Connection {
 public:
  explicit Connection(const ExternalModelOptions& opt) : opt_(opt) {
    try {
      start();
    } catch (...) {
      stop();
      throw;
    }
  }
  ~Connection() { stop(); }

  // Sends all points of one batch and collects their outputs in order.
  void exchange(const PointSet& xs, std::size_t begin, std::size_t end, std::optional<double> theta,
                std::span<double> ys);

 private:
  void start();
  void stop();
  bool read_line(std::string& line, int timeout_ms, std::uint64_t pending_id);
  [[noreturn]] void fail_closed(std::uint64_t pending_id);

  const ExternalModelOptions& opt_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::uint64_t next_id_ = 1;
  std::string buffer_;
};

namespace {

int timeout_ms(double seconds) { return static_cast<int>(seconds * 1000.0); }

}  // namespace

void ExternalModel::Connection::start() {
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
    throw ProcessExitError(std::string("socketpair failed: ") + std::strerror(errno), 0);

  std::vector<char*> argv;
  for (const auto& a : opt_.command) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_ = fork();
  if (pid_ < 0) {
    close(sv[0]);
    close(sv[1]);
    throw ProcessExitError(std::string("fork failed: ") + std::strerror(errno), 0);
  }
  if (pid_ == 0) {
    dup2(sv[1], STDIN_FILENO);
    dup2(sv[1], STDOUT_FILENO);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(sv[1]);
  fd_ = sv[0];
  fcntl(fd_, F_SETFL, fcntl(fd_, F_GETFL) | O_NONBLOCK);

  std::string line;
  if (!read_line(line, timeout_ms(opt_.timeout_seconds), 0)) fail_closed(0);
  json hello;
  try {
    hello = json::parse(line);
  } catch (const json::exception&) {
    throw ProtocolError("malformed handshake line: " + line, 0);
  }
  if (!hello.is_object() || hello.value("ready", false) != true)
    throw ProtocolError("expected {\"ready\":true} handshake, got: " + line, 0);
}

void ExternalModel::Connection::stop() {
  if (fd_ >= 0) {
    close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    // EOF on stdin lets a well-behaved child exit on its own.
    for (int i = 0; i < 20; ++i) {
      if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
}

void ExternalModel::Connection::fail_closed(std::uint64_t pending_id) {
  int status = 0;
  pid_t r = -1;
  for (int i = 0; i < 100 && pid_ > 0; ++i) {
    r = waitpid(pid_, &status, WNOHANG);
    if (r == pid_) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (r == pid_ && pid_ > 0) {
    pid_ = -1;
    if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
      throw ProcessExitError("model process exited with status " + std::to_string(WEXITSTATUS(status)), pending_id);
  }
  throw TimeoutError("model process stopped responding", pending_id);
}

// false on EOF; throws TimeoutError after `timeout_ms` of silence.
bool ExternalModel::Connection::read_line(std::string& line, int timeout, std::uint64_t pending_id) {
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      line.assign(buffer_, 0, nl);
      buffer_.erase(0, nl + 1);
      return true;
    }
    pollfd p{fd_, POLLIN, 0};
    int rc = poll(&p, 1, timeout);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("poll failed: ") + std::strerror(errno), pending_id);
    }
    if (rc == 0) throw TimeoutError("no response within " + std::to_string(timeout) + " ms", pending_id);
    char chunk[65536];
    ssize_t n = read(fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EAGAIN || errno == EINTR) continue;
      return false;
    }
    if (n == 0) return false;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void ExternalModel::Connection::exchange(const PointSet& xs, std::size_t begin, std::size_t end,
                                         std::optional<double> theta, std::span<double> ys) {
  const std::size_t n = end - begin;
  const std::size_t n_out = opt_.output_dim;
  const std::uint64_t first_id = next_id_;
  next_id_ += n;

  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    json req;
    req["id"] = first_id + i;
    auto row = xs.row(begin + i);
    req["x"] = std::vector<double>(row.begin(), row.end());
    if (theta) req["theta"] = *theta;
    out += req.dump();
    out += '\n';
  }

  std::vector<char> answered(n, 0);
  std::size_t remaining = n;
  std::size_t written = 0;
  const int timeout = timeout_ms(opt_.timeout_seconds);

  auto first_unanswered = [&]() -> std::uint64_t {
    for (std::size_t i = 0; i < n; ++i)
      if (!answered[i]) return first_id + i;
    return first_id + n;
  };

  auto handle = [&](const std::string& line) {
    json resp;
    try {
      resp = json::parse(line);
    } catch (const json::exception&) {
      throw ProtocolError("malformed response line: " + line, first_unanswered());
    }
    if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer())
      throw ProtocolError("response without integer id: " + line, first_unanswered());
    const auto id = resp["id"].get<std::uint64_t>();
    if (id < first_id || id >= first_id + n) return;  // unknown or stale id
    const std::size_t k = id - first_id;
    if (answered[k]) return;  // duplicate
    if (!resp.contains("y") || !resp["y"].is_array() || resp["y"].size() != n_out)
      throw ProtocolError("response must carry " + std::to_string(n_out) + " outputs: " + line, id);
    for (std::size_t l = 0; l < n_out; ++l) {
      if (!resp["y"][l].is_number()) throw ProtocolError("non-numeric output: " + line, id);
      ys[k * n_out + l] = resp["y"][l].get<double>();
    }
    answered[k] = 1;
    --remaining;
  };

  while (remaining > 0) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty()) handle(line);
      continue;
    }
    pollfd p{fd_, static_cast<short>(POLLIN | (written < out.size() ? POLLOUT : 0)), 0};
    int rc = poll(&p, 1, timeout);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("poll failed: ") + std::strerror(errno), first_unanswered());
    }
    if (rc == 0) throw TimeoutError("no response within " + std::to_string(timeout) + " ms", first_unanswered());
    if (p.revents & POLLIN) {
      char chunk[65536];
      ssize_t r = read(fd_, chunk, sizeof chunk);
      if (r == 0) fail_closed(first_unanswered());
      if (r > 0) buffer_.append(chunk, static_cast<std::size_t>(r));
      else if (errno != EAGAIN && errno != EINTR) fail_closed(first_unanswered());
    } else if (p.revents & (POLLHUP | POLLERR)) {
      fail_closed(first_unanswered());
    }
    if ((p.revents & POLLOUT) && written < out.size()) {
      ssize_t w = send(fd_, out.data() + written, out.size() - written, MSG_NOSIGNAL);
      if (w > 0) written += static_cast<std::size_t>(w);
      else if (w < 0 && errno != EAGAIN && errno != EINTR) fail_closed(first_unanswered());
    }
  }
}

ExternalModel::ExternalModel(ExternalModelOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw ConfigError("external model needs a command", "model.command");
  if (options_.input_dim == 0 || options_.output_dim == 0)
    throw ConfigError("external model needs input_dim and output_dim", "model");
  if (options_.batch_size == 0) throw ConfigError("batch_size must be >= 1", "model.batch_size");
  if (!(options_.timeout_seconds > 0.0)) throw ConfigError("timeout must be > 0", "model.timeout");
}

ExternalModel::~ExternalModel() = default;

std::size_t ExternalModel::spawned() const {
  std::lock_guard lock(mutex_);
  return spawned_;
}

std::unique_ptr<ExternalModel::Connection> ExternalModel::acquire() const {
  {
    std::lock_guard lock(mutex_);
    if (!idle_.empty()) {
      auto c = std::move(idle_.back());
      idle_.pop_back();
      return c;
    }
    ++spawned_;
  }
  return std::make_unique<Connection>(options_);
}

void ExternalModel::release(std::unique_ptr<Connection> c) const {
  std::lock_guard lock(mutex_);
  idle_.push_back(std::move(c));
}

void ExternalModel::run(const PointSet& xs, std::optional<double> theta, std::span<double> ys) const {
  if (xs.dim() != input_dim())
    throw ModelEvaluationError("external: expected " + std::to_string(input_dim()) + " inputs");
  if (ys.size() != xs.size() * output_dim()) throw ModelEvaluationError("external: batch output buffer has wrong size");
  auto conn = acquire();
  // A connection that throws is dropped here; the next call starts afresh.
  for (std::size_t b = 0; b < xs.size(); b += options_.batch_size) {
    const std::size_t e = std::min(xs.size(), b + options_.batch_size);
    conn->exchange(xs, b, e, theta, ys.subspan(b * output_dim(), (e - b) * output_dim()));
  }
  release(std::move(conn));
  meter().add(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    check_output(xs.row(i), ys.subspan(i * output_dim(), output_dim()));
}

void ExternalModel::evaluate_batch(const PointSet& xs, std::optional<double> theta, std::span<double> ys) const {
  run(xs, theta, ys);
}

void ExternalModel::compute(std::span<const double> x, std::optional<double> theta, std::span<double> y) const {
  PointSet one(1, x.size());
  std::copy(x.begin(), x.end(), one.row(0).begin());
  auto conn = acquire();
  conn->exchange(one, 0, 1, theta, y);
  release(std::move(conn));
}

}  // namespace kbsa
