#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "holobind/backbone.hpp"
#include "holobind/layers.hpp"
#include "holobind/rng.hpp"
#include "holobind/tensor_io.hpp"

namespace holobind {

// Envelope (18 bytes) followed by one f32 tensor container:
//   magic "HBRQ" | "HBRS" (4) | version u16 = 1 | request_id u64 |
//   status u8 (requests: 0) | reserved u8 x 3
inline constexpr std::size_t kEnvelopeSize = 18;
inline constexpr std::uint16_t kProtocolVersion = 1;

enum class Status : std::uint8_t { ok = 0, malformed = 1, apply_failed = 2 };
const char* to_string(Status status);

struct BoundRequest {
  std::uint64_t request_id = 0;
  Tensor payload;  // the bound input; never secret material

  bool operator==(const BoundRequest&) const = default;
};

struct BoundResponse {
  std::uint64_t request_id = 0;
  Status status = Status::ok;
  Tensor payload;  // f_W(bound input); empty on error

  bool operator==(const BoundResponse&) const = default;
};

Bytes encode_request(const BoundRequest& req);
BoundRequest decode_request(std::span<const std::uint8_t> bytes);
Bytes encode_response(const BoundResponse& resp);
BoundResponse decode_response(std::span<const std::uint8_t> bytes);

/// Wire size of a request carrying a tensor of `dims`.
std::size_t request_wire_size(const Dims& dims);

/// Per-request log line: id, dims and handling time only.
struct RequestLog {
  std::uint64_t request_id;
  Dims dims;
  double micros;
  Status status;
};
using RequestLogger = std::function<void(const RequestLog&)>;

/// Untrusted side: evaluates f_W on whatever bound tensor arrives.
class Worker {
 public:
  explicit Worker(BackboneSpec spec, RequestLogger logger = {});

  const BackboneSpec& spec() const noexcept { return spec_; }
  /// Never throws for bad input: malformed requests produce a status=malformed
  /// response, failures inside f_W a status=apply_failed response.
  Bytes handle(std::span<const std::uint8_t> request) const;

 private:
  BackboneSpec spec_;
  RequestLogger logger_;
};

/// One request in, one response out.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Bytes exchange(std::span<const std::uint8_t> request) = 0;
};

/// Calls the worker in-process.
class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(const Worker& worker) : worker_(worker) {}
  Bytes exchange(std::span<const std::uint8_t> request) override { return worker_.handle(request); }

 private:
  const Worker& worker_;
};

/// Records every exchange verbatim; used to audit round counts and content.
class RecordingTransport final : public Transport {
 public:
  struct Exchange {
    Bytes request;
    Bytes response;
  };

  explicit RecordingTransport(Transport& inner) : inner_(inner) {}
  Bytes exchange(std::span<const std::uint8_t> request) override;
  std::vector<Exchange> transcript() const;

 private:
  Transport& inner_;
  mutable std::mutex mutex_;
  std::vector<Exchange> transcript_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text);  // "host:port"
  std::string to_string() const;
};

/// Frames are u32 little-endian length + message bytes over one TCP
/// connection, opened lazily and reused. Exchanges on one transport are
/// serialized.
class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(Endpoint endpoint);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  Bytes exchange(std::span<const std::uint8_t> request) override;

 private:
  void connect_locked();
  void close_locked();

  Endpoint endpoint_;
  std::mutex mutex_;
  int fd_ = -1;
};

/// TCP front end for a Worker; one thread per connection.
class WorkerServer {
 public:
  explicit WorkerServer(const Worker& worker);
  ~WorkerServer();
  WorkerServer(const WorkerServer&) = delete;
  WorkerServer& operator=(const WorkerServer&) = delete;

  /// Binds and starts accepting; port 0 picks a free port. Returns the
  /// bound endpoint.
  Endpoint start(const Endpoint& listen);
  /// Blocks until stop() is called from another thread.
  void wait();
  void stop();

 private:
  void accept_loop();
  void serve_connection(int fd);

  const Worker& worker_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> handlers_;
  std::vector<int> client_fds_;
};

struct QueryPlan {
  std::size_t k = 1;
  RngStream rng;
};

/// Mean of k softmax outputs f_P(unbind(f_W(x (*) s_i), s_i)), each replicate
/// with its own fresh secret and its own request. Secrets are wiped after use.
std::vector<double> client_infer(const Tensor& x, const QueryPlan& plan, Transport& transport,
                                 const Head& predict_head);

/// k replicates: remote = k f_W; local = k (bind + unbind transforms + f_P);
/// bytes each way = k (envelope + f32 container). A bind or unbind costs
/// three FFTs per channel (two forward, one inverse).
FlopReport cost_report(const BackboneSpec& spec, std::size_t k, const Head* predict_head);
/// Local-side FLOPs of f_P for the toy head geometry.
std::uint64_t head_flops(const Head& head);
/// Header k,remote_flops,local_flops,remote_fraction,bytes_up,bytes_down.
void write_cost_csv(std::ostream& out, std::size_t k, const FlopReport& report);

}  // namespace holobind
