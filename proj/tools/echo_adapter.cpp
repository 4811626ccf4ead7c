// Stub adapter speaking protocol v1: every scored word gets log(1/V).
// Misbehaviour switches exist so tests can exercise the client's errors.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

using json = nlohmann::json;

namespace {

struct Behaviour {
  int version = 1;
  double vocab = 1000.0;
  std::string model = "echo";
  bool wrong_count = false;
  bool malformed = false;
  bool hang = false;
  bool surface_sensitive = false;
  bool positive = false;
};

// Returns the reply, or an empty string for "say nothing".
std::string handle(const std::string& line, const Behaviour& b) {
  json msg = json::parse(line, nullptr, false);
  if (msg.is_discarded() || !msg.is_object()) return "";
  const std::string type = msg.value("type", "");
  if (type == "hello") {
    return json{{"type", "hello_ack"}, {"version", b.version}, {"model", b.model}}
        .dump();
  }
  if (type != "score") return "";
  if (b.hang) return "";
  if (b.malformed) return "{\"type\":\"scores\",\"id\":";
  const auto scored = msg.at("scored");
  const auto words = msg.at("words");
  const long long sep = msg.value("separator_index", -1LL);
  json logprobs = json::array();
  for (const auto& idx : scored) {
    double lp = -std::log(b.vocab);
    if (b.surface_sensitive && sep >= 0 &&
        static_cast<std::size_t>(sep) < words.size()) {
      lp -= static_cast<double>(words[sep].get<std::string>().size()) * 1e-3;
    }
    if (b.positive) lp = 0.5;
    (void)idx;
    logprobs.push_back(lp);
  }
  if (b.wrong_count) logprobs.push_back(-1.0);
  return json{{"type", "scores"}, {"id", msg.at("id")}, {"logprobs", logprobs}}
      .dump();
}

int serve_stream(std::istream& in, std::ostream& out, const Behaviour& b) {
  std::string line;
  while (std::getline(in, line)) {
    const std::string reply = handle(line, b);
    if (!reply.empty()) out << reply << '\n' << std::flush;
  }
  return 0;
}

int serve_tcp(int port, const Behaviour& b) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd, 1) != 0) {
    std::perror("echo-adapter: listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  // The chosen port, for callers that asked for port 0.
  std::cout << ntohs(addr.sin_port) << std::endl;
  int conn = ::accept(fd, nullptr, nullptr);
  if (conn < 0) return 1;
  std::string buffer;
  char chunk[4096];
  while (true) {
    ssize_t n = ::read(conn, chunk, sizeof chunk);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string reply = handle(buffer.substr(0, nl), b);
      buffer.erase(0, nl + 1);
      if (reply.empty()) continue;
      reply += '\n';
      if (::send(conn, reply.data(), reply.size(), MSG_NOSIGNAL) < 0) break;
    }
  }
  ::close(conn);
  ::close(fd);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protocol v1 echo adapter"};
  Behaviour b;
  int port = -1;
  app.add_option("--vocab", b.vocab, "V in log(1/V)");
  app.add_option("--version", b.version, "protocol version to announce");
  app.add_option("--model", b.model, "model name to announce");
  app.add_option("--tcp", port, "listen on this loopback port (0: any)");
  app.add_flag("--wrong-count", b.wrong_count, "return one score too many");
  app.add_flag("--malformed", b.malformed, "return broken JSON");
  app.add_flag("--hang", b.hang, "never answer score requests");
  app.add_flag("--surface-sensitive", b.surface_sensitive,
               "let the separator's surface string leak into scores");
  app.add_flag("--positive", b.positive, "return log-probabilities above 0");
  CLI11_PARSE(app, argc, argv);
  if (port >= 0) return serve_tcp(port, b);
  std::ios::sync_with_stdio(false);
  return serve_stream(std::cin, std::cout, b);
}
