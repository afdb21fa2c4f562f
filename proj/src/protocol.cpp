#include "latinv/protocol.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <nlohmann/json.hpp>

#include "latinv/error.hpp"

extern char** environ;

namespace latinv::protocol {

using nlohmann::json;

namespace {

std::vector<Real> real_array(const json& j, const char* field, const std::string& line, std::uint64_t ordinal) {
  const auto it = j.find(field);
  if (it == j.end() || !it->is_array()) {
    throw ProtocolError(std::string("missing array field '") + field + "' in: " + excerpt(line), ordinal);
  }
  std::vector<Real> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw ProtocolError(std::string("non-numeric entry in '") + field + "': " + excerpt(line), ordinal);
    out.push_back(v.get<Real>());
  }
  return out;
}

json parse_object(const std::string& line, std::uint64_t ordinal) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("malformed message: " + excerpt(line), ordinal);
  return j;
}

std::size_t count_field(const json& j, const char* field, const std::string& line) {
  const auto it = j.find(field);
  if (it == j.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw ProtocolError(std::string("greeting lacks a nonnegative integer '") + field + "': " + excerpt(line), 0);
  }
  return it->get<std::size_t>();
}

}  // namespace

std::string excerpt(const std::string& line, std::size_t max_len) {
  std::string out;
  for (char c : line.substr(0, max_len)) out += (c == '\n' || c == '\r') ? ' ' : c;
  if (line.size() > max_len) out += "...";
  return "'" + out + "'";
}

std::string encode_greeting(const Greeting& g) {
  json j{{"proto", g.proto}, {"k", g.k}, {"K", g.K}, {"d", g.d}};
  if (g.trusted) j["trusted"] = true;
  return j.dump();
}

Greeting decode_greeting(const std::string& line) {
  json j = parse_object(line, 0);
  Greeting g;
  const auto proto = j.find("proto");
  if (proto == j.end() || !proto->is_number_integer()) {
    throw ProtocolError("greeting lacks integer 'proto': " + excerpt(line), 0);
  }
  g.proto = proto->get<int>();
  g.k = count_field(j, "k", line);
  g.K = count_field(j, "K", line);
  g.d = j.contains("d") ? count_field(j, "d", line) : 0;
  if (auto t = j.find("trusted"); t != j.end() && t->is_boolean()) g.trusted = t->get<bool>();
  return g;
}

std::string encode_request(std::int64_t id, std::span<const Real> latent) {
  json j{{"id", id}, {"latent", std::vector<Real>(latent.begin(), latent.end())}};
  return j.dump();
}

std::string encode_shutdown() { return json{{"id", kShutdownId}}.dump(); }

Request decode_request(const std::string& line) {
  json j = parse_object(line, 0);
  const auto id = j.find("id");
  if (id == j.end() || !id->is_number_integer()) throw ProtocolError("request lacks integer 'id': " + excerpt(line), 0);
  Request r;
  r.id = id->get<std::int64_t>();
  if (!r.is_shutdown()) r.latent = real_array(j, "latent", line, 0);
  return r;
}

std::string encode_response(const Response& r) {
  json j{{"id", r.id}};
  if (r.error) {
    j["error"] = *r.error;
  } else {
    j["confidence"] = r.confidence;
    if (!r.feature.empty()) j["feature"] = r.feature;
  }
  return j.dump();
}

Response decode_response(const std::string& line, std::uint64_t ordinal) {
  json j = parse_object(line, ordinal);
  const auto id = j.find("id");
  if (id == j.end() || !id->is_number_integer()) {
    throw ProtocolError("response lacks integer 'id': " + excerpt(line), ordinal);
  }
  Response r;
  r.id = id->get<std::int64_t>();
  if (auto e = j.find("error"); e != j.end()) {
    r.error = e->is_string() ? e->get<std::string>() : e->dump();
    return r;
  }
  r.confidence = real_array(j, "confidence", line, ordinal);
  if (j.contains("feature")) r.feature = real_array(j, "feature", line, ordinal);
  return r;
}

}  // namespace latinv::protocol

namespace latinv {

Subprocess::Subprocess(const std::string& command) : command_(command) {
  // A dead adapter must surface as a TransportError, not kill us.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw TransportError("pipe: " + std::string(std::strerror(errno)), 0);
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw TransportError("pipe: " + std::string(std::strerror(errno)), 0);
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw TransportError("cannot spawn '" + command_ + "': " + std::strerror(rc), 0);
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

Subprocess::~Subprocess() {
  if (!reaped_ && pid_ > 0) {
    if (to_child_ >= 0) ::close(to_child_);
    to_child_ = -1;
    ::kill(pid_, SIGTERM);
    wait();
  }
  if (from_child_ >= 0) ::close(from_child_);
}

void Subprocess::write_line(const std::string& line) {
  if (to_child_ < 0) throw TransportError("write to closed adapter '" + command_ + "'", 0);
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("write to adapter '" + command_ + "' failed: " + std::strerror(errno), 0);
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> Subprocess::read_line() {
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (from_child_ < 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("read from adapter '" + command_ + "' failed: " + std::strerror(errno), 0);
    }
    if (n == 0) {
      ::close(from_child_);
      from_child_ = -1;
      if (buffer_.empty()) return std::nullopt;
      std::string rest = std::move(buffer_);
      buffer_.clear();
      return rest;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

int Subprocess::wait() {
  if (reaped_) return status_;
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  int st = 0;
  while (::waitpid(pid_, &st, 0) < 0) {
    if (errno != EINTR) {
      st = -1;
      break;
    }
  }
  reaped_ = true;
  status_ = (st >= 0 && WIFEXITED(st)) ? WEXITSTATUS(st) : -1;
  return status_;
}

OracleDescriptor external_handshake(LineChannel& channel, std::size_t expected_k, std::size_t expected_K,
                                    bool* trusted) {
  auto line = channel.read_line();
  if (!line) throw TransportError("adapter closed the stream before its greeting", 0);
  const auto g = protocol::decode_greeting(*line);
  if (g.proto != protocol::kVersion) {
    throw ConfigError("protocol version mismatch: adapter speaks " + std::to_string(g.proto) + ", client speaks " +
                      std::to_string(protocol::kVersion));
  }
  if (g.k != expected_k) {
    throw ConfigError("latent dimension mismatch: adapter k=" + std::to_string(g.k) + ", config k=" +
                      std::to_string(expected_k));
  }
  if (g.K != expected_K) {
    throw ConfigError("class count mismatch: adapter K=" + std::to_string(g.K) + ", config K=" +
                      std::to_string(expected_K));
  }
  if (g.k == 0 || g.K == 0) throw ConfigError("adapter announced an empty latent or class space");
  if (trusted) *trusted = g.trusted;
  return OracleDescriptor{g.k, g.K, g.d, OracleKind::external};
}

ExternalOracle::ExternalOracle(std::unique_ptr<LineChannel> channel, std::size_t expected_k, std::size_t expected_K)
    : Oracle(OracleDescriptor{}), channel_(std::move(channel)) {
  descriptor_ = external_handshake(*channel_, expected_k, expected_K, &trusted_);
}

std::unique_ptr<ExternalOracle> ExternalOracle::spawn(const std::string& command, std::size_t expected_k,
                                                      std::size_t expected_K) {
  return std::make_unique<ExternalOracle>(std::make_unique<Subprocess>(command), expected_k, expected_K);
}

ExternalOracle::~ExternalOracle() {
  try {
    shutdown();
  } catch (const Error&) {
    // adapter already gone
  }
}

void ExternalOracle::shutdown() {
  if (closed_) return;
  closed_ = true;
  channel_->write_line(protocol::encode_shutdown());
  if (auto* proc = dynamic_cast<Subprocess*>(channel_.get())) proc->wait();
}

OracleResponse ExternalOracle::answer(std::span<const Real> latent, std::uint64_t ordinal) {
  if (closed_) throw TransportError("oracle connection already shut down", ordinal);
  const auto id = static_cast<std::int64_t>(ordinal);
  try {
    channel_->write_line(protocol::encode_request(id, latent));
  } catch (const TransportError& e) {
    throw TransportError(e.what(), ordinal);
  }
  std::optional<std::string> line;
  try {
    line = channel_->read_line();
  } catch (const TransportError& e) {
    throw TransportError(e.what(), ordinal);
  }
  if (!line) throw TransportError("adapter closed the stream", ordinal);
  auto r = protocol::decode_response(*line, ordinal);
  if (r.id != id) {
    throw ProtocolError("response id " + std::to_string(r.id) + " does not match request id " + std::to_string(id),
                        ordinal);
  }
  if (r.error) throw ProtocolError("adapter reported error: " + *r.error, ordinal);
  if (!r.feature.empty()) {
    if (!trusted_) throw ProtocolError("feature vector sent over an untrusted connection", ordinal);
    if (r.feature.size() != descriptor_.feature_dim) {
      throw ProtocolError("feature vector has " + std::to_string(r.feature.size()) + " entries, greeting announced " +
                              std::to_string(descriptor_.feature_dim),
                          ordinal);
    }
  }
  return OracleResponse{std::move(r.confidence), std::move(r.feature)};
}

}  // namespace latinv
