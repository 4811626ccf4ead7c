// Client side of adapter protocol v1: newline-delimited JSON spoken to an
// external scoring process over its standard streams or over TCP.
//
//   -> {"type":"hello","version":1}
//   <- {"type":"hello_ack","version":1,"model":"..."}
//   -> {"type":"score","id":7,"words":[...],"separator_index":3,"scored":[5,6]}
//   <- {"type":"scores","id":7,"logprobs":[-2.1,-0.4]}
//
// Log-probabilities are natural-log, one per scored index, summed over the
// adapter's own subword segmentation of each word.
#pragma once

#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxinfo/language_model.hpp"

namespace ctxinfo {

inline constexpr int kAdapterProtocolVersion = 1;

class AdapterError : public std::runtime_error {
 public:
  enum class Kind { transport, timeout, malformed, version_mismatch, alignment };

  AdapterError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class AdapterTransport {
 public:
  virtual ~AdapterTransport() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws AdapterError{timeout} when no full line arrives in time.
  virtual std::string receive_line(std::chrono::milliseconds timeout) = 0;
};

// "tcp:HOST:PORT" connects a socket; anything else is run with /bin/sh -c.
std::unique_ptr<AdapterTransport> open_transport(const std::string& address);

class AdapterEndpoint {
 public:
  // Performs the hello handshake.
  AdapterEndpoint(std::unique_ptr<AdapterTransport> transport,
                  std::chrono::milliseconds timeout = std::chrono::seconds(30));

  const std::string& model_name() const { return model_; }
  int protocol_version() const { return version_; }

  std::vector<double> score(const std::vector<std::string>& words,
                            std::size_t separator_index,
                            const std::vector<std::size_t>& scored);

 private:
  std::unique_ptr<AdapterTransport> transport_;
  std::chrono::milliseconds timeout_;
  std::string model_;
  int version_ = 0;
  long long next_id_ = 0;
};

AdapterEndpoint open_adapter(const std::string& address,
                             std::chrono::milliseconds timeout =
                                 std::chrono::seconds(30));

// LanguageModel view of an attached adapter. Training happens on the adapter
// side; train() only records that the arm was attached. Scoring is serial.
class AdapterModel : public LanguageModel {
 public:
  AdapterModel(std::string address, ReservedTokens reserved = {});

  std::string name() const override;
  void train(std::span<const TrainingView> views, std::uint64_t seed) override;
  double score(std::span<const std::string> context,
               std::string_view target) const override;
  std::vector<double> score_window(
      const EvaluationWindow& window) const override;

 private:
  AdapterEndpoint& endpoint() const;

  std::string address_;
  ReservedTokens reserved_;
  mutable std::unique_ptr<AdapterEndpoint> endpoint_;
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::string model;
  std::vector<ConformanceCheck> checks;
  bool passed() const;
};

// Adapter-agnostic protocol checks: handshake, alignment, range,
// determinism, per-position consistency and separator handling.
ConformanceReport check_adapter(AdapterEndpoint& endpoint);

}  // namespace ctxinfo
