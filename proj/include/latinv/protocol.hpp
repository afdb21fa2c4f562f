#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latinv/oracle.hpp"
#include "latinv/tensor.hpp"

// Line-delimited JSON protocol spoken by external oracle adapters over a
// subprocess's stdin/stdout:
//
//   server greeting  {"proto":1,"k":16,"K":10,"d":32}     ("trusted":true optional)
//   request          {"id":7,"latent":[...k floats]}
//   response         {"id":7,"confidence":[...K floats]}  ("feature":[...] only when trusted)
//   error reply      {"id":7,"error":"message"}
//   shutdown         {"id":-1}
//
// Unknown fields are ignored. Floats carry full round-trip precision.

namespace latinv::protocol {

inline constexpr int kVersion = 1;
inline constexpr std::int64_t kShutdownId = -1;

struct Greeting {
  int proto = kVersion;
  std::size_t k = 0;
  std::size_t K = 0;
  std::size_t d = 0;
  bool trusted = false;
};

struct Request {
  std::int64_t id = 0;
  std::vector<Real> latent;
  bool is_shutdown() const { return id == kShutdownId; }
};

struct Response {
  std::int64_t id = 0;
  std::vector<Real> confidence;
  std::vector<Real> feature;
  std::optional<std::string> error;
};

std::string encode_greeting(const Greeting& g);
/// Throws ProtocolError (ordinal 0) quoting the offending line.
Greeting decode_greeting(const std::string& line);

std::string encode_request(std::int64_t id, std::span<const Real> latent);
std::string encode_shutdown();
Request decode_request(const std::string& line);

std::string encode_response(const Response& r);
Response decode_response(const std::string& line, std::uint64_t ordinal);

/// Short, single-line excerpt of a payload for diagnostics.
std::string excerpt(const std::string& line, std::size_t max_len = 80);

}  // namespace latinv::protocol

namespace latinv {

/// Bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(const std::string& line) = 0;
  /// std::nullopt on end of stream.
  virtual std::optional<std::string> read_line() = 0;
};

/// Child process started through /bin/sh with its stdin/stdout piped.
class Subprocess final : public LineChannel {
 public:
  explicit Subprocess(const std::string& command);
  ~Subprocess() override;
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  void write_line(const std::string& line) override;
  std::optional<std::string> read_line() override;

  /// Closes the child's stdin and reaps it. Returns the exit status, or -1 if
  /// the child was killed by a signal.
  int wait();
  const std::string& command() const { return command_; }

 private:
  std::string command_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool reaped_ = false;
  int status_ = 0;
};

/// Reads and validates the server greeting. Version, k or K disagreeing with
/// the expected values raise ConfigError naming both sides.
OracleDescriptor external_handshake(LineChannel& channel, std::size_t expected_k, std::size_t expected_K,
                                    bool* trusted = nullptr);

class ExternalOracle final : public Oracle {
 public:
  /// Takes ownership of an already-open channel and performs the handshake.
  ExternalOracle(std::unique_ptr<LineChannel> channel, std::size_t expected_k, std::size_t expected_K);
  /// Spawns `command` and performs the handshake.
  static std::unique_ptr<ExternalOracle> spawn(const std::string& command, std::size_t expected_k,
                                               std::size_t expected_K);
  ~ExternalOracle() override;

  bool trusted() const { return trusted_; }
  /// Sends the shutdown request; further queries fail with TransportError.
  void shutdown();

 protected:
  OracleResponse answer(std::span<const Real> latent, std::uint64_t ordinal) override;

 private:
  std::unique_ptr<LineChannel> channel_;
  bool trusted_ = false;
  bool closed_ = false;
};

}  // namespace latinv
