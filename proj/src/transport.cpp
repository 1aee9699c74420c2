#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "holobind/errors.hpp"
#include "holobind/protocol.hpp"

namespace holobind {
namespace {

// Upper bound on a single frame; a 1024 x 1024 x 4 f32 payload fits.
constexpr std::uint32_t kMaxFrame = 64u << 20;

bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_all(int fd, std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

bool send_frame(int fd, std::span<const std::uint8_t> body) {
  Bytes header;
  put_u32(header, static_cast<std::uint32_t>(body.size()));
  return write_all(fd, header.data(), header.size()) && write_all(fd, body.data(), body.size());
}

// Returns false on a clean or broken close.
bool recv_frame(int fd, Bytes& body) {
  std::uint8_t header[4];
  if (!read_all(fd, header, 4)) return false;
  const std::uint32_t len = get_u32(std::span<const std::uint8_t>(header, 4), 0);
  if (len > kMaxFrame) return false;
  body.resize(len);
  return read_all(fd, body.data(), len);
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw ParameterError("endpoint must be host:port, got '" + text + "'");
  Endpoint e;
  e.host = text.substr(0, colon);
  if (e.host.empty()) e.host = "127.0.0.1";
  const std::string port = text.substr(colon + 1);
  if (port.empty() || port.find_first_not_of("0123456789") != std::string::npos ||
      std::stoul(port) > 65535)
    throw ParameterError("bad port in endpoint '" + text + "'");
  e.port = static_cast<std::uint16_t>(std::stoul(port));
  return e;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

TcpTransport::TcpTransport(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}

TcpTransport::~TcpTransport() {
  std::lock_guard lock(mutex_);
  close_locked();
}

void TcpTransport::close_locked() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void TcpTransport::connect_locked() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(endpoint_.port);
  if (::getaddrinfo(endpoint_.host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
    throw TransportError("cannot resolve " + endpoint_.to_string());
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + endpoint_.to_string());
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  fd_ = fd;
}

Bytes TcpTransport::exchange(std::span<const std::uint8_t> request) {
  std::lock_guard lock(mutex_);
  if (fd_ < 0) connect_locked();
  Bytes response;
  if (!send_frame(fd_, request) || !recv_frame(fd_, response)) {
    close_locked();
    throw TransportError("connection to " + endpoint_.to_string() + " failed mid-exchange");
  }
  return response;
}

WorkerServer::WorkerServer(const Worker& worker) : worker_(worker) {}

WorkerServer::~WorkerServer() { stop(); }

Endpoint WorkerServer::start(const Endpoint& listen) {
  if (running_) throw ParameterError("server already running");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(listen.port);
  const std::string host = listen.host == "localhost" ? "127.0.0.1" : listen.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ParameterError("listen address must be an IPv4 literal, got '" + listen.host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("cannot listen on " + listen.to_string() + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return Endpoint{host, ntohs(addr.sin_port)};
}

void WorkerServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listening socket shut down
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    handlers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void WorkerServer::serve_connection(int fd) {
  Bytes request;
  while (recv_frame(fd, request)) {
    const Bytes response = worker_.handle(request);
    if (!send_frame(fd, response)) break;
  }
  ::shutdown(fd, SHUT_RDWR);
}

void WorkerServer::wait() {
  if (acceptor_.joinable()) acceptor_.join();
}

void WorkerServer::stop() {
  if (!running_.exchange(false)) {
    if (acceptor_.joinable()) acceptor_.join();
    return;
  }
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::thread> handlers;
  std::vector<int> fds;
  {
    std::lock_guard lock(mutex_);
    handlers.swap(handlers_);
    fds.swap(client_fds_);
  }
  for (int fd : fds) ::shutdown(fd, SHUT_RDWR);
  for (auto& t : handlers) t.join();
  for (int fd : fds) ::close(fd);
}

}  // namespace holobind
