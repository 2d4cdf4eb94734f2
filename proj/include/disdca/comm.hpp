#pragma once

#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disdca/errors.hpp"

namespace disdca {

enum class ReduceOp { average, sum };

const char* reduce_op_name(ReduceOp op);
ReduceOp reduce_op_from_name(std::string_view name);

// Elementwise combine in ascending worker-id (slot) order, so the result is
// a pure function of the inputs and ids, independent of arrival order and
// transport. All reduce paths funnel through this.
std::vector<double> reduce_in_order(const std::vector<std::vector<double>>& locals,
                                    ReduceOp op);

enum class MsgType : std::uint8_t {
  hello = 0,
  contribute = 1,
  result = 2,
  done = 3,
  error = 4,
};

// Frame layout: magic "DDCA" | version u8 = 1 | msg_type u8 | round u32 LE |
// payload_len u64 LE | payload. CONTRIBUTE/RESULT payloads are packed
// little-endian IEEE-754 doubles; HELLO is worker id u32 + dim u32; ERROR is
// UTF-8 text.
struct WireMessage {
  MsgType type = MsgType::hello;
  std::uint32_t round = 0;
  std::vector<std::uint8_t> payload;
};

inline constexpr std::size_t kFrameHeaderSize = 18;
inline constexpr std::uint64_t kMaxPayload = 1ull << 30;

void append_frame(std::vector<std::uint8_t>& out, const WireMessage& msg);
// Returns bytes consumed, or 0 if more input is needed. Throws
// TransportError on a malformed header.
std::size_t try_decode_frame(std::span<const std::uint8_t> in, WireMessage* msg);

std::vector<std::uint8_t> encode_vector_payload(std::span<const double> v);
std::vector<double> decode_vector_payload(std::span<const std::uint8_t> p);
std::vector<std::uint8_t> encode_hello_payload(std::uint32_t worker_id,
                                               std::uint32_t dim);
void decode_hello_payload(std::span<const std::uint8_t> p,
                          std::uint32_t* worker_id, std::uint32_t* dim);

// In-process collective for the threaded simulated mode: all K participants
// block in reduce() until the round's contributions are in, then every caller
// gets the identical combined vector.
class InProcessChannel {
 public:
  explicit InProcessChannel(int K);

  std::vector<double> reduce(int worker_id, std::span<const double> local,
                             ReduceOp op, std::uint32_t round);

 private:
  const int K_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::vector<double>> slots_;
  std::vector<double> result_;
  int arrived_ = 0;
  std::uint64_t generation_ = 0;
  std::uint32_t expected_round_ = 0;
};

struct TcpOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  double timeout_s = 30.0;
};

// Worker side of the star topology: HELLO on connect, CONTRIBUTE/RESULT per
// round, DONE at the end.
class TcpChannel {
 public:
  TcpChannel(const TcpOptions& opts, std::uint32_t worker_id, std::uint32_t dim);
  ~TcpChannel();
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  std::vector<double> reduce(std::span<const double> local, ReduceOp op,
                             std::uint32_t round);
  void done();

 private:
  void send_all(std::span<const std::uint8_t> bytes);
  WireMessage recv_frame();

  int fd_ = -1;
  double timeout_s_ = 30.0;
  std::uint32_t dim_ = 0;
  std::vector<std::uint8_t> buf_;
};

struct CoordinatorOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  int workers = 1;
  std::uint32_t dim = 1;
  ReduceOp op = ReduceOp::average;
  double timeout_s = 30.0;
};

// Accepts exactly K HELLOs with distinct worker ids 0..K-1, then per round
// collects K CONTRIBUTEs and broadcasts the combined RESULT, until all K
// workers send DONE. Connections that misbehave before completing the HELLO
// get an ERROR frame and are dropped without disturbing the collective.
class CoordinatorServer {
 public:
  explicit CoordinatorServer(const CoordinatorOptions& opts);
  ~CoordinatorServer();
  CoordinatorServer(const CoordinatorServer&) = delete;
  CoordinatorServer& operator=(const CoordinatorServer&) = delete;

  std::uint16_t port() const { return port_; }
  void serve();

 private:
  struct Conn;
  void close_conn(Conn& c);

  CoordinatorOptions opts_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace disdca
