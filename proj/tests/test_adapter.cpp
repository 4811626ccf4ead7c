#include <cmath>
#include <cstdio>
#include <string>

#include "doctest.h"

#include "ctxinfo/adapter.hpp"

using namespace ctxinfo;
using namespace std::chrono_literals;

namespace {

std::string echo(const std::string& flags = "") {
  return std::string(CTXINFO_ECHO_ADAPTER) + " " + flags;
}

const std::vector<std::string> kWords = {"a", "b", "<sep>", "c", "d"};

AdapterError::Kind failure_kind(const std::string& flags,
                                std::chrono::milliseconds timeout = 5s) {
  try {
    AdapterEndpoint e = open_adapter(echo(flags), timeout);
    e.score(kWords, 2, {3, 4});
  } catch (const AdapterError& err) {
    return err.kind();
  }
  FAIL("expected an adapter error");
  return AdapterError::Kind::transport;
}

}  // namespace

TEST_CASE("handshake and echo scores") {
  AdapterEndpoint e = open_adapter(echo("--vocab 50 --model stub"));
  CHECK(e.protocol_version() == 1);
  CHECK(e.model_name() == "stub");
  const auto scores = e.score(kWords, 2, {3, 4});
  REQUIRE(scores.size() == 2);
  for (double s : scores) CHECK(s == doctest::Approx(-std::log(50.0)));
  // Repeated requests reuse the connection.
  CHECK(e.score(kWords, 2, {4}).size() == 1);
}

TEST_CASE("client-side request checks") {
  AdapterEndpoint e = open_adapter(echo());
  CHECK_THROWS_AS(e.score(kWords, 2, {2}), std::invalid_argument);
  CHECK_THROWS_AS(e.score(kWords, 2, {5}), std::invalid_argument);
  // No separator at all is allowed.
  CHECK(e.score({"a", "b"}, static_cast<std::size_t>(-1), {1}).size() == 1);
}

TEST_CASE("typed adapter errors") {
  CHECK(failure_kind("--wrong-count") == AdapterError::Kind::alignment);
  CHECK(failure_kind("--malformed") == AdapterError::Kind::malformed);
  CHECK(failure_kind("--positive") == AdapterError::Kind::malformed);
  CHECK(failure_kind("--version 2") == AdapterError::Kind::version_mismatch);
  CHECK(failure_kind("--hang", 300ms) == AdapterError::Kind::timeout);
  try {
    open_adapter("true", 2s);
    FAIL("expected an adapter error");
  } catch (const AdapterError& err) {
    CHECK(err.kind() == AdapterError::Kind::transport);
  }
  CHECK_THROWS_AS(open_adapter("/nonexistent/adapter-binary 2>/dev/null", 2s), AdapterError);
  CHECK_THROWS_AS(open_adapter("tcp:127.0.0.1:1", 2s), AdapterError);
}

TEST_CASE("TCP transport") {
  const std::string cmd = echo("--tcp 0 --vocab 7");
  FILE* server = ::popen(cmd.c_str(), "r");
  REQUIRE(server != nullptr);
  int port = 0;
  REQUIRE(std::fscanf(server, "%d", &port) == 1);
  {
    AdapterEndpoint e = open_adapter("tcp:127.0.0.1:" + std::to_string(port));
    const auto s = e.score(kWords, 2, {3});
    REQUIRE(s.size() == 1);
    CHECK(s[0] == doctest::Approx(-std::log(7.0)));
  }
  CHECK(::pclose(server) == 0);
}

TEST_CASE("adapter as a language model") {
  AdapterModel model(echo("--vocab 20"));
  model.train({}, 1);
  EvaluationWindow w;
  w.realized_input = kWords;
  w.separator_index = 2;
  w.first_scored = 0;
  w.end_scored = 2;
  const auto s = model.score_window(w);
  REQUIRE(s.size() == 2);
  CHECK(s[1] == doctest::Approx(-std::log(20.0)));
  CHECK(model.score(std::vector<std::string>{"a", "<sep>", "c"}, "d") ==
        doctest::Approx(-std::log(20.0)));
}

TEST_CASE("conformance checker") {
  {
    AdapterEndpoint e = open_adapter(echo());
    const auto report = check_adapter(e);
    CHECK(report.passed());
    CHECK(report.model == "echo");
    CHECK(report.checks.size() >= 6);
  }
  {
    AdapterEndpoint e = open_adapter(echo("--surface-sensitive"));
    const auto report = check_adapter(e);
    CHECK_FALSE(report.passed());
    bool separator_failed = false;
    for (const auto& c : report.checks) {
      if (!c.passed && c.name.find("separator") != std::string::npos) {
        separator_failed = true;
      }
    }
    CHECK(separator_failed);
  }
  {
    AdapterEndpoint e = open_adapter(echo("--positive"));
    CHECK_FALSE(check_adapter(e).passed());
  }
}
