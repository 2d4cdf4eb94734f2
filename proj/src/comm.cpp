#include "disdca/comm.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <chrono>
#include <cerrno>
#include <cstring>
#include <list>

static_assert(std::endian::native == std::endian::little,
              "wire codec assumes a little-endian host");

namespace disdca {

const char* reduce_op_name(ReduceOp op) {
  return op == ReduceOp::average ? "average" : "sum";
}

ReduceOp reduce_op_from_name(std::string_view name) {
  if (name == "average") return ReduceOp::average;
  if (name == "sum") return ReduceOp::sum;
  throw ConfigError("unknown reduce op: " + std::string(name));
}

std::vector<double> reduce_in_order(const std::vector<std::vector<double>>& locals,
                                    ReduceOp op) {
  if (locals.empty()) throw TransportError("reduce with zero participants");
  std::vector<double> out = locals[0];
  for (std::size_t k = 1; k < locals.size(); ++k) {
    if (locals[k].size() != out.size())
      throw TransportError("reduce dimension mismatch: slot " + std::to_string(k));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += locals[k][i];
  }
  if (op == ReduceOp::average) {
    const double inv_k = static_cast<double>(locals.size());
    for (double& v : out) v /= inv_k;
  }
  return out;
}

// ---------------------------------------------------------------- framing

namespace {

constexpr char kMagic[4] = {'D', 'D', 'C', 'A'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void append_frame(std::vector<std::uint8_t>& out, const WireMessage& msg) {
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  put_u32(out, msg.round);
  put_u64(out, msg.payload.size());
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
}

std::size_t try_decode_frame(std::span<const std::uint8_t> in, WireMessage* msg) {
  if (in.size() < kFrameHeaderSize) return 0;
  if (std::memcmp(in.data(), kMagic, 4) != 0)
    throw TransportError("bad frame magic");
  if (in[4] != kVersion)
    throw TransportError("unsupported protocol version " + std::to_string(in[4]));
  if (in[5] > static_cast<std::uint8_t>(MsgType::error))
    throw TransportError("unknown message type " + std::to_string(in[5]));
  const std::uint64_t len = get_u64(in.data() + 10);
  if (len > kMaxPayload) throw TransportError("oversized payload");
  if (in.size() < kFrameHeaderSize + len) return 0;
  msg->type = static_cast<MsgType>(in[5]);
  msg->round = get_u32(in.data() + 6);
  msg->payload.assign(in.begin() + kFrameHeaderSize,
                      in.begin() + kFrameHeaderSize + len);
  return kFrameHeaderSize + static_cast<std::size_t>(len);
}

std::vector<std::uint8_t> encode_vector_payload(std::span<const double> v) {
  std::vector<std::uint8_t> out(v.size() * 8);
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

std::vector<double> decode_vector_payload(std::span<const std::uint8_t> p) {
  if (p.size() % 8 != 0) throw TransportError("vector payload not 8-byte aligned");
  std::vector<double> out(p.size() / 8);
  std::memcpy(out.data(), p.data(), p.size());
  return out;
}

std::vector<std::uint8_t> encode_hello_payload(std::uint32_t worker_id,
                                               std::uint32_t dim) {
  std::vector<std::uint8_t> out;
  put_u32(out, worker_id);
  put_u32(out, dim);
  return out;
}

void decode_hello_payload(std::span<const std::uint8_t> p,
                          std::uint32_t* worker_id, std::uint32_t* dim) {
  if (p.size() != 8) throw TransportError("hello payload must be 8 bytes");
  *worker_id = get_u32(p.data());
  *dim = get_u32(p.data() + 4);
}

// ----------------------------------------------------- in-process channel

InProcessChannel::InProcessChannel(int K) : K_(K), slots_(K) {
  if (K < 1) throw ConfigError("channel needs K >= 1");
}

std::vector<double> InProcessChannel::reduce(int worker_id,
                                             std::span<const double> local,
                                             ReduceOp op, std::uint32_t round) {
  std::unique_lock lk(mu_);
  if (worker_id < 0 || worker_id >= K_)
    throw TransportError("worker id out of range");
  if (round != expected_round_)
    throw TransportError("round " + std::to_string(round) + " out of order, expected " +
                         std::to_string(expected_round_));
  slots_[worker_id].assign(local.begin(), local.end());
  const std::uint64_t gen = generation_;
  if (++arrived_ == K_) {
    result_ = reduce_in_order(slots_, op);
    arrived_ = 0;
    ++generation_;
    ++expected_round_;
    cv_.notify_all();
    return result_;
  }
  cv_.wait(lk, [&] { return generation_ != gen; });
  return result_;
}

// ------------------------------------------------------------------ TCP

namespace {

using Clock = std::chrono::steady_clock;

int poll_one(int fd, short events, Clock::time_point deadline) {
  for (;;) {
    const auto now = Clock::now();
    if (now >= deadline) return 0;
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - now).count();
    pollfd pfd{fd, events, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(ms, 60000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    if (rc > 0) return 1;
  }
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw TransportError("bad address: " + host);
  return addr;
}

}  // namespace

TcpChannel::TcpChannel(const TcpOptions& opts, std::uint32_t worker_id,
                       std::uint32_t dim)
    : timeout_s_(opts.timeout_s), dim_(dim) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr = make_addr(opts.host, opts.port);
  set_nonblocking(fd_);
  const int rc = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    ::close(fd_);
    fd_ = -1;
    throw TransportError("connect " + opts.host + ":" + std::to_string(opts.port) +
                         ": " + std::strerror(errno));
  }
  if (rc != 0) {
    const auto deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(timeout_s_));
    if (!poll_one(fd_, POLLOUT, deadline))
      throw TransportError("connect timeout to " + opts.host + ":" +
                           std::to_string(opts.port));
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd_, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0)
      throw TransportError("connect: " + std::string(std::strerror(err)));
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  std::vector<std::uint8_t> frame;
  append_frame(frame, {MsgType::hello, 0, encode_hello_payload(worker_id, dim)});
  send_all(frame);
}

TcpChannel::~TcpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::send_all(std::span<const std::uint8_t> bytes) {
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(timeout_s_));
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t rc =
        ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (rc > 0) {
      sent += static_cast<std::size_t>(rc);
      continue;
    }
    if (rc < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      if (!poll_one(fd_, POLLOUT, deadline)) throw TransportError("send timeout");
      continue;
    }
    if (rc < 0 && errno == EINTR) continue;
    throw TransportError(std::string("send: ") + std::strerror(errno));
  }
}

WireMessage TcpChannel::recv_frame() {
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(timeout_s_));
  WireMessage msg;
  for (;;) {
    const std::size_t used = try_decode_frame(buf_, &msg);
    if (used > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + used);
      return msg;
    }
    if (!poll_one(fd_, POLLIN, deadline))
      throw TransportError("timeout waiting for coordinator");
    std::uint8_t chunk[16384];
    const ssize_t rc = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (rc == 0) throw TransportError("coordinator closed the connection");
    if (rc < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
      throw TransportError(std::string("recv: ") + std::strerror(errno));
    }
    buf_.insert(buf_.end(), chunk, chunk + rc);
  }
}

std::vector<double> TcpChannel::reduce(std::span<const double> local, ReduceOp,
                                       std::uint32_t round) {
  if (local.size() != dim_) throw TransportError("contribution dimension mismatch");
  std::vector<std::uint8_t> frame;
  append_frame(frame, {MsgType::contribute, round, encode_vector_payload(local)});
  send_all(frame);
  const WireMessage msg = recv_frame();
  if (msg.type == MsgType::error)
    throw TransportError("coordinator error: " +
                         std::string(msg.payload.begin(), msg.payload.end()));
  if (msg.type != MsgType::result || msg.round != round)
    throw TransportError("unexpected frame while waiting for round " +
                         std::to_string(round));
  return decode_vector_payload(msg.payload);
}

void TcpChannel::done() {
  std::vector<std::uint8_t> frame;
  append_frame(frame, {MsgType::done, 0, {}});
  send_all(frame);
}

// ----------------------------------------------------------- coordinator

struct CoordinatorServer::Conn {
  int fd = -1;
  std::vector<std::uint8_t> buf;
  int worker_id = -1;  // -1 until a valid HELLO
  bool done = false;
  bool contributed = false;
};

CoordinatorServer::CoordinatorServer(const CoordinatorOptions& opts) : opts_(opts) {
  if (opts.workers < 1) throw ConfigError("coordinator needs at least one worker");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0)
    throw TransportError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(opts.host, opts.port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("bind " + opts.host + ":" + std::to_string(opts.port) +
                         ": " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  ::listen(listen_fd_, 64);
  set_nonblocking(listen_fd_);
}

CoordinatorServer::~CoordinatorServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void CoordinatorServer::close_conn(Conn& c) {
  if (c.fd >= 0) ::close(c.fd);
  c.fd = -1;
}

void CoordinatorServer::serve() {
  const int K = opts_.workers;
  std::list<Conn> conns;
  std::vector<Conn*> workers(K, nullptr);
  std::vector<std::vector<double>> slots(K);
  std::uint32_t round = 0;
  int contributed = 0;
  int done_count = 0;

  const auto send_frame = [&](Conn& c, const WireMessage& msg) {
    std::vector<std::uint8_t> bytes;
    append_frame(bytes, msg);
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t rc =
          ::send(c.fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (rc > 0) {
        sent += static_cast<std::size_t>(rc);
        continue;
      }
      if (rc < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
        pollfd pfd{c.fd, POLLOUT, 0};
        ::poll(&pfd, 1, 1000);
        continue;
      }
      if (rc < 0 && errno == EINTR) continue;
      return false;
    }
    return true;
  };
  const auto reject = [&](Conn& c, const std::string& why) {
    WireMessage err{MsgType::error, round, {}};
    err.payload.assign(why.begin(), why.end());
    send_frame(c, err);
    if (c.worker_id >= 0) workers[c.worker_id] = nullptr;
    close_conn(c);
  };

  // Frame handler; returns false when the connection must be dropped.
  const auto handle = [&](Conn& c, const WireMessage& msg) -> bool {
    switch (msg.type) {
      case MsgType::hello: {
        std::uint32_t id = 0, dim = 0;
        try {
          decode_hello_payload(msg.payload, &id, &dim);
        } catch (const TransportError& e) {
          reject(c, e.what());
          return false;
        }
        if (c.worker_id >= 0) {
          reject(c, "duplicate hello");
          return false;
        }
        if (id >= static_cast<std::uint32_t>(K)) {
          reject(c, "worker id " + std::to_string(id) + " out of range");
          return false;
        }
        if (workers[id] != nullptr) {
          reject(c, "duplicate worker id " + std::to_string(id));
          return false;
        }
        if (dim != opts_.dim) {
          reject(c, "dim mismatch: got " + std::to_string(dim) + ", expected " +
                        std::to_string(opts_.dim));
          return false;
        }
        c.worker_id = static_cast<int>(id);
        workers[id] = &c;
        return true;
      }
      case MsgType::contribute: {
        if (c.worker_id < 0) {
          reject(c, "contribute before hello");
          return false;
        }
        if (msg.round != round) {
          reject(c, "contribute for round " + std::to_string(msg.round) +
                        " while coordinator is at " + std::to_string(round));
          throw TransportError("worker " + std::to_string(c.worker_id) +
                               " violated round ordering");
        }
        if (c.contributed) {
          reject(c, "duplicate contribution");
          throw TransportError("worker " + std::to_string(c.worker_id) +
                               " contributed twice in round " + std::to_string(round));
        }
        if (msg.payload.size() != static_cast<std::size_t>(opts_.dim) * 8) {
          reject(c, "payload length mismatch");
          throw TransportError("worker " + std::to_string(c.worker_id) +
                               " sent a malformed contribution");
        }
        slots[c.worker_id] = decode_vector_payload(msg.payload);
        c.contributed = true;
        if (++contributed == K) {
          const std::vector<double> result = reduce_in_order(slots, opts_.op);
          WireMessage out{MsgType::result, round, encode_vector_payload(result)};
          for (int k = 0; k < K; ++k) {
            if (!send_frame(*workers[k], out))
              throw TransportError("failed to send result to worker " +
                                   std::to_string(k));
            workers[k]->contributed = false;
          }
          contributed = 0;
          ++round;
        }
        return true;
      }
      case MsgType::done: {
        if (c.worker_id < 0) {
          reject(c, "done before hello");
          return false;
        }
        if (!c.done) {
          c.done = true;
          ++done_count;
        }
        return true;
      }
      case MsgType::result:
        reject(c, "unexpected result frame from worker");
        return false;
      case MsgType::error:
        if (c.worker_id < 0) {  // never completed a hello; just drop it
          close_conn(c);
          return false;
        }
        throw TransportError(
            "worker " + std::to_string(c.worker_id) + " reported error: " +
            std::string(msg.payload.begin(), msg.payload.end()));
    }
    return false;
  };

  const auto deadline_step = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(opts_.timeout_s));
  auto deadline = Clock::now() + deadline_step;

  while (done_count < K) {
    std::vector<pollfd> pfds;
    pfds.push_back({listen_fd_, POLLIN, 0});
    std::vector<Conn*> by_slot;
    for (Conn& c : conns) {
      if (c.fd < 0) continue;
      pfds.push_back({c.fd, POLLIN, 0});
      by_slot.push_back(&c);
    }
    const auto now = Clock::now();
    if (now >= deadline) throw TransportError("coordinator timeout");
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    const int rc = ::poll(pfds.data(), pfds.size(),
                          static_cast<int>(std::min<long long>(ms, 60000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    if (rc == 0) continue;  // deadline handled above
    deadline = Clock::now() + deadline_step;

    if (pfds[0].revents & POLLIN) {
      for (;;) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        set_nonblocking(fd);
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        conns.push_back(Conn{fd, {}, -1, false, false});
      }
    }

    for (std::size_t s = 1; s < pfds.size(); ++s) {
      Conn& c = *by_slot[s - 1];
      if (c.fd < 0 || !(pfds[s].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      std::uint8_t chunk[16384];
      const ssize_t n = ::recv(c.fd, chunk, sizeof(chunk), 0);
      if (n == 0) {
        if (c.worker_id >= 0 && !c.done)
          throw TransportError("worker " + std::to_string(c.worker_id) +
                               " disconnected mid-run");
        if (c.worker_id >= 0) workers[c.worker_id] = nullptr;
        close_conn(c);
        continue;
      }
      if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
        if (c.worker_id >= 0 && !c.done)
          throw TransportError("worker " + std::to_string(c.worker_id) +
                               " recv: " + std::strerror(errno));
        if (c.worker_id >= 0) workers[c.worker_id] = nullptr;
        close_conn(c);
        continue;
      }
      c.buf.insert(c.buf.end(), chunk, chunk + n);
      bool alive = true;
      while (alive && c.fd >= 0) {
        WireMessage msg;
        std::size_t used = 0;
        try {
          used = try_decode_frame(c.buf, &msg);
        } catch (const TransportError& e) {
          if (c.worker_id >= 0 && !c.done) {
            reject(c, e.what());
            throw TransportError("worker " + std::to_string(c.worker_id) +
                                 " sent a malformed frame: " + e.what());
          }
          reject(c, e.what());
          alive = false;
          break;
        }
        if (used == 0) break;
        c.buf.erase(c.buf.begin(), c.buf.begin() + used);
        alive = handle(c, msg);
      }
    }
    conns.remove_if([](const Conn& c) { return c.fd < 0; });
  }

  for (Conn& c : conns) close_conn(c);
}

}  // namespace disdca
