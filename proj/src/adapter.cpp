#include "ctxinfo/adapter.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace ctxinfo {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

[[noreturn]] void transport_error(const std::string& what) {
  throw AdapterError(AdapterError::Kind::transport,
                     what + ": " + std::strerror(errno));
}

// Line framing over a pair of file descriptors (may be the same socket).
class FdTransport : public AdapterTransport {
 public:
  FdTransport(int read_fd, int write_fd, bool is_socket)
      : read_fd_(read_fd), write_fd_(write_fd), is_socket_(is_socket) {}

  void send_line(const std::string& line) override {
    std::string data = line + '\n';
    std::size_t sent = 0;
    while (sent < data.size()) {
      ssize_t n = is_socket_ ? ::send(write_fd_, data.data() + sent,
                                      data.size() - sent, MSG_NOSIGNAL)
                             : ::write(write_fd_, data.data() + sent,
                                       data.size() - sent);
      if (n < 0) {
        if (errno == EINTR) continue;
        transport_error("adapter write failed");
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string receive_line(std::chrono::milliseconds timeout) override {
    const auto deadline = Clock::now() + timeout;
    while (true) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - Clock::now());
      if (left.count() <= 0) {
        throw AdapterError(AdapterError::Kind::timeout,
                           "adapter did not answer within " +
                               std::to_string(timeout.count()) + " ms");
      }
      pollfd pfd{read_fd_, POLLIN, 0};
      int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        transport_error("adapter poll failed");
      }
      if (ready == 0) continue;
      char chunk[4096];
      ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        transport_error("adapter read failed");
      }
      if (n == 0) {
        throw AdapterError(AdapterError::Kind::transport,
                           "adapter closed the connection");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  int read_fd_;
  int write_fd_;
  bool is_socket_;
  std::string buffer_;
};

class ProcessTransport : public FdTransport {
 public:
  static std::unique_ptr<ProcessTransport> spawn(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) transport_error("pipe");
    if (::pipe2(from_child, O_CLOEXEC) != 0) transport_error("pipe");
    pid_t pid = ::fork();
    if (pid < 0) transport_error("fork");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(),
              static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::unique_ptr<ProcessTransport>(
        new ProcessTransport(pid, from_child[0], to_child[1]));
  }

  ~ProcessTransport() override {
    ::close(write_fd_);
    // Give the adapter a moment to exit on EOF before killing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        ::close(read_fd_);
        return;
      }
      ::usleep(20000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    ::close(read_fd_);
  }

 private:
  ProcessTransport(pid_t pid, int read_fd, int write_fd)
      : FdTransport(read_fd, write_fd, false), pid_(pid) {}

  pid_t pid_;
};

class SocketTransport : public FdTransport {
 public:
  static std::unique_ptr<SocketTransport> connect(const std::string& host,
                                                  const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &found);
        rc != 0) {
      throw AdapterError(AdapterError::Kind::transport,
                         "cannot resolve " + host + ":" + port + ": " +
                             ::gai_strerror(rc));
    }
    int fd = -1;
    for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC,
                    ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(found);
    if (fd < 0) transport_error("cannot connect to " + host + ":" + port);
    return std::unique_ptr<SocketTransport>(new SocketTransport(fd));
  }

  ~SocketTransport() override { ::close(read_fd_); }

 private:
  explicit SocketTransport(int fd) : FdTransport(fd, fd, true) {}
};

json parse_message(const std::string& line) {
  try {
    auto msg = json::parse(line);
    if (!msg.is_object()) throw json::type_error::create(302, "not an object", nullptr);
    return msg;
  } catch (const json::exception& e) {
    throw AdapterError(AdapterError::Kind::malformed,
                       "malformed adapter message: " + std::string(e.what()));
  }
}

std::string expect_type(const json& msg, const std::string& type) {
  auto it = msg.find("type");
  if (it == msg.end() || !it->is_string() || *it != type) {
    throw AdapterError(AdapterError::Kind::malformed,
                       "expected message type '" + type + "', got " +
                           msg.dump());
  }
  return type;
}

}  // namespace

std::unique_ptr<AdapterTransport> open_transport(const std::string& address) {
  if (address.rfind("tcp:", 0) == 0) {
    const std::string rest = address.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
      throw AdapterError(AdapterError::Kind::transport,
                         "socket address must be tcp:HOST:PORT");
    }
    return SocketTransport::connect(rest.substr(0, colon),
                                    rest.substr(colon + 1));
  }
  return ProcessTransport::spawn(address);
}

AdapterEndpoint::AdapterEndpoint(std::unique_ptr<AdapterTransport> transport,
                                 std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  transport_->send_line(
      json{{"type", "hello"}, {"version", kAdapterProtocolVersion}}.dump());
  const json ack = parse_message(transport_->receive_line(timeout_));
  expect_type(ack, "hello_ack");
  const auto version = ack.find("version");
  if (version == ack.end() || !version->is_number_integer()) {
    throw AdapterError(AdapterError::Kind::malformed,
                       "hello_ack without integer version");
  }
  version_ = version->get<int>();
  if (version_ != kAdapterProtocolVersion) {
    throw AdapterError(AdapterError::Kind::version_mismatch,
                       "adapter speaks protocol " + std::to_string(version_) +
                           ", expected " +
                           std::to_string(kAdapterProtocolVersion));
  }
  const auto model = ack.find("model");
  if (model == ack.end() || !model->is_string()) {
    throw AdapterError(AdapterError::Kind::malformed,
                       "hello_ack without model name");
  }
  model_ = model->get<std::string>();
}

std::vector<double> AdapterEndpoint::score(
    const std::vector<std::string>& words, std::size_t separator_index,
    const std::vector<std::size_t>& scored) {
  for (std::size_t i : scored) {
    if (i >= words.size() || i == separator_index) {
      throw std::invalid_argument("scored index " + std::to_string(i) +
                                  " is out of range or the separator");
    }
  }
  const long long id = next_id_++;
  json request = {{"type", "score"},
                  {"id", id},
                  {"words", words},
                  {"separator_index",
                   separator_index == std::string::npos
                       ? -1
                       : static_cast<long long>(separator_index)},
                  {"scored", scored}};
  transport_->send_line(request.dump());
  const json reply = parse_message(transport_->receive_line(timeout_));
  expect_type(reply, "scores");
  const auto reply_id = reply.find("id");
  if (reply_id == reply.end() || !reply_id->is_number_integer() ||
      reply_id->get<long long>() != id) {
    throw AdapterError(AdapterError::Kind::malformed,
                       "response id does not match request " +
                           std::to_string(id));
  }
  const auto logprobs = reply.find("logprobs");
  if (logprobs == reply.end() || !logprobs->is_array()) {
    throw AdapterError(AdapterError::Kind::malformed,
                       "response without logprobs array");
  }
  if (logprobs->size() != scored.size()) {
    throw AdapterError(AdapterError::Kind::alignment,
                       "adapter returned " + std::to_string(logprobs->size()) +
                           " scores for " + std::to_string(scored.size()) +
                           " positions");
  }
  std::vector<double> out;
  out.reserve(scored.size());
  for (const auto& v : *logprobs) {
    if (!v.is_number()) {
      throw AdapterError(AdapterError::Kind::malformed,
                         "non-numeric log-probability " + v.dump());
    }
    const double lp = v.get<double>();
    if (!std::isfinite(lp) || lp > 0.0) {
      throw AdapterError(AdapterError::Kind::malformed,
                         "log-probability out of range: " + v.dump());
    }
    out.push_back(lp);
  }
  return out;
}

AdapterEndpoint open_adapter(const std::string& address,
                             std::chrono::milliseconds timeout) {
  return AdapterEndpoint(open_transport(address), timeout);
}

AdapterModel::AdapterModel(std::string address, ReservedTokens reserved)
    : address_(std::move(address)), reserved_(std::move(reserved)) {}

AdapterEndpoint& AdapterModel::endpoint() const {
  if (!endpoint_) {
    endpoint_ = std::make_unique<AdapterEndpoint>(open_transport(address_));
  }
  return *endpoint_;
}

std::string AdapterModel::name() const {
  return "adapter(" + endpoint().model_name() + ")";
}

void AdapterModel::train(std::span<const TrainingView>, std::uint64_t) {
  endpoint();  // attach
}

double AdapterModel::score(std::span<const std::string> context,
                           std::string_view target) const {
  check_scorable(target, reserved_);
  std::vector<std::string> words(context.begin(), context.end());
  words.emplace_back(target);
  std::size_t separator = std::string::npos;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (context[i] == reserved_.separator) separator = i;
  }
  return endpoint().score(words, separator, {context.size()}).front();
}

std::vector<double> AdapterModel::score_window(
    const EvaluationWindow& window) const {
  std::vector<std::size_t> scored;
  scored.reserve(window.scored_count());
  for (std::size_t j = window.first_scored; j < window.end_scored; ++j) {
    const std::size_t i = window.realized_index(j);
    check_scorable(window.realized_input[i], reserved_);
    scored.push_back(i);
  }
  return endpoint().score(window.realized_input, window.separator_index,
                          scored);
}

bool ConformanceReport::passed() const {
  if (checks.empty()) return false;
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

ConformanceReport check_adapter(AdapterEndpoint& endpoint) {
  ConformanceReport report;
  report.model = endpoint.model_name();
  auto run = [&](std::string name, auto&& body) {
    ConformanceCheck check{std::move(name), false, ""};
    try {
      check.detail = body();
      check.passed = check.detail.empty();
    } catch (const std::exception& e) {
      check.detail = e.what();
    }
    report.checks.push_back(std::move(check));
  };

  const std::vector<std::string> words = {
      "Pierre", "Vinken", "will",  "join", "<sep>", "the",
      "board",  "as",     "a",     "nonexecutive", "director", "."};
  const std::size_t sep = 4;

  run("handshake", [&]() -> std::string {
    if (endpoint.protocol_version() != kAdapterProtocolVersion) {
      return "protocol version " + std::to_string(endpoint.protocol_version());
    }
    if (endpoint.model_name().empty()) return "empty model name";
    return "";
  });

  run("alignment", [&]() -> std::string {
    for (std::vector<std::size_t> scored :
         {std::vector<std::size_t>{5}, {5, 6}, {5, 6, 7, 8, 9, 10, 11}}) {
      auto got = endpoint.score(words, sep, scored);
      if (got.size() != scored.size()) return "count mismatch";
    }
    return "";
  });

  run("range", [&]() -> std::string {
    for (double lp : endpoint.score(words, sep, {5, 6, 7, 8, 9, 10, 11})) {
      if (!std::isfinite(lp) || lp > 0.0) return "value out of range";
    }
    return "";
  });

  run("determinism", [&]() -> std::string {
    auto a = endpoint.score(words, sep, {6, 9, 11});
    auto b = endpoint.score(words, sep, {6, 9, 11});
    return a == b ? "" : "identical requests gave different scores";
  });

  // A word's score must not depend on which other positions were requested;
  // with subword-summed scoring this is the additivity contract per word.
  run("per-position consistency", [&]() -> std::string {
    auto joint = endpoint.score(words, sep, {5, 6, 7});
    for (std::size_t k = 0; k < 3; ++k) {
      auto single = endpoint.score(words, sep, {5 + k});
      if (std::abs(single[0] - joint[k]) > 1e-9) {
        return "position " + std::to_string(5 + k) +
               " differs between joint and single requests";
      }
    }
    return "";
  });

  run("separator handling", [&]() -> std::string {
    // The separator is identified by index, not by surface string.
    auto renamed = words;
    renamed[sep] = "###";
    if (endpoint.score(words, sep, {5, 6}) !=
        endpoint.score(renamed, sep, {5, 6})) {
      return "scores depend on the separator's surface string";
    }
    // Empty ablated prefix.
    std::vector<std::string> bare(words.begin() + sep, words.end());
    if (endpoint.score(bare, 0, {1, 2}).size() != 2) return "empty prefix";
    try {
      endpoint.score(words, sep, {sep});
      return "client allowed scoring the separator";
    } catch (const std::invalid_argument&) {
    }
    return "";
  });
  return report;
}

}  // namespace ctxinfo
