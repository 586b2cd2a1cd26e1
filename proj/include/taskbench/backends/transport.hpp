#pragma once

// Point-to-point channels between ranks. Both media deliver frames reliably
// and in per-sender order into the receiving rank's Mailbox.
//
// Wire frame (local_socket): u32 LE payload length, u32 LE edge id, payload.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "taskbench/backends/config.hpp"
#include "taskbench/backends/dataflow.hpp"

namespace taskbench {

struct Frame {
  std::uint32_t edge_id = 0;
  std::vector<std::byte> payload;
  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::size_t kFrameHeaderBytes = 8;

inline std::vector<std::byte> encode_frame(std::uint32_t edge_id, std::span<const std::byte> payload) {
  if (payload.size() > 0xffffffffULL) throw ConfigMismatch("frame payload exceeds 4 GiB");
  std::vector<std::byte> out(kFrameHeaderBytes + payload.size());
  dataflow::store_u32_le(out.data(), static_cast<std::uint32_t>(payload.size()));
  dataflow::store_u32_le(out.data() + 4, edge_id);
  if (!payload.empty()) std::memcpy(out.data() + kFrameHeaderBytes, payload.data(), payload.size());
  return out;
}

/// Incremental decoder for a byte stream of frames split arbitrarily.
class FrameDecoder {
 public:
  template <class Sink>
  void feed(std::span<const std::byte> bytes, Sink&& sink) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    std::size_t pos = 0;
    while (buf_.size() - pos >= kFrameHeaderBytes) {
      const std::uint32_t len = dataflow::load_u32_le(buf_.data() + pos);
      if (buf_.size() - pos - kFrameHeaderBytes < len) break;
      Frame f;
      f.edge_id = dataflow::load_u32_le(buf_.data() + pos + 4);
      const auto* begin = buf_.data() + pos + kFrameHeaderBytes;
      f.payload.assign(begin, begin + len);
      sink(std::move(f));
      pos += kFrameHeaderBytes + len;
    }
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  std::size_t buffered() const noexcept { return buf_.size(); }

 private:
  std::vector<std::byte> buf_;
};

class TransportAborted : public BackendError {
 public:
  TransportAborted() : BackendError("transport aborted") {}
};

/// Inbound frames of one rank, one FIFO per sender.
class Mailbox {
 public:
  explicit Mailbox(std::uint32_t senders) : queues_(senders) {}

  void push(std::uint32_t from, Frame f) {
    {
      std::lock_guard lk(mu_);
      queues_[from].push_back(std::move(f));
    }
    cv_.notify_all();
  }

  Frame pop(std::uint32_t from) {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return aborted_ || !queues_[from].empty(); });
    if (queues_[from].empty()) throw TransportAborted();
    Frame f = std::move(queues_[from].front());
    queues_[from].pop_front();
    return f;
  }

  void abort() {
    {
      std::lock_guard lk(mu_);
      aborted_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::deque<Frame>> queues_;
  bool aborted_ = false;
};

class Transport {
 public:
  explicit Transport(std::uint32_t ranks) {
    boxes_.reserve(ranks);
    for (std::uint32_t r = 0; r < ranks; ++r) boxes_.push_back(std::make_unique<Mailbox>(ranks));
  }
  virtual ~Transport() = default;
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  virtual void send(std::uint32_t from, std::uint32_t to, std::uint32_t edge_id,
                    std::span<const std::byte> payload) = 0;
  // No further sends from `from`.
  virtual void finish_sender(std::uint32_t) {}

  Frame receive(std::uint32_t to, std::uint32_t from) { return boxes_[to]->pop(from); }

  virtual void abort() {
    for (auto& b : boxes_) b->abort();
  }

  std::uint32_t ranks() const noexcept { return static_cast<std::uint32_t>(boxes_.size()); }

 protected:
  Mailbox& mailbox(std::uint32_t r) { return *boxes_[r]; }

 private:
  std::vector<std::unique_ptr<Mailbox>> boxes_;
};

/// In-memory queues between ranks of one process.
class SharedQueueTransport final : public Transport {
 public:
  using Transport::Transport;

  void send(std::uint32_t from, std::uint32_t to, std::uint32_t edge_id,
            std::span<const std::byte> payload) override {
    mailbox(to).push(from, Frame{edge_id, {payload.begin(), payload.end()}});
  }
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const noexcept { return fd_; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

[[noreturn]] inline void throw_errno(const char* what) {
  throw BackendError(fmt::format("{}: {}", what, std::strerror(errno)));
}

}  // namespace detail

/// Loopback TCP connection per ordered rank pair. Each rank runs a receiver
/// thread that drains its inbound sockets into its Mailbox, so blocking
/// writes can never wedge against an unread peer.
class LocalSocketTransport final : public Transport {
 public:
  explicit LocalSocketTransport(std::uint32_t ranks)
      : Transport(ranks), out_(ranks * ranks), in_(ranks * ranks) {
    detail::Fd listener(::socket(AF_INET, SOCK_STREAM, 0));
    if (listener.get() < 0) detail::throw_errno("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(listener.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      detail::throw_errno("bind");
    if (::listen(listener.get(), 16) != 0) detail::throw_errno("listen");
    socklen_t len = sizeof addr;
    if (::getsockname(listener.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
      detail::throw_errno("getsockname");

    for (std::uint32_t s = 0; s < ranks; ++s) {
      for (std::uint32_t r = 0; r < ranks; ++r) {
        if (s == r) continue;
        detail::Fd c(::socket(AF_INET, SOCK_STREAM, 0));
        if (c.get() < 0) detail::throw_errno("socket");
        if (::connect(c.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
          detail::throw_errno("connect");
        detail::Fd a(::accept(listener.get(), nullptr, nullptr));
        if (a.get() < 0) detail::throw_errno("accept");
        int one = 1;
        ::setsockopt(c.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        out_[s * ranks + r] = std::move(c);
        in_[r * ranks + s] = std::move(a);
      }
    }

    receivers_.reserve(ranks);
    for (std::uint32_t r = 0; r < ranks; ++r) receivers_.emplace_back([this, r] { receive_loop(r); });
  }

  ~LocalSocketTransport() override {
    stop_.store(true);
    for (auto& fd : out_) fd.reset();
    for (auto& t : receivers_) t.join();
  }

  void send(std::uint32_t from, std::uint32_t to, std::uint32_t edge_id,
            std::span<const std::byte> payload) override {
    const auto frame = encode_frame(edge_id, payload);
    const int fd = out_[from * ranks() + to].get();
    std::size_t off = 0;
    while (off < frame.size()) {
      const auto n = ::send(fd, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        detail::throw_errno("send");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void finish_sender(std::uint32_t from) override {
    for (std::uint32_t r = 0; r < ranks(); ++r)
      if (r != from) ::shutdown(out_[from * ranks() + r].get(), SHUT_WR);
  }

  void abort() override {
    stop_.store(true);
    Transport::abort();
  }

 private:
  void receive_loop(std::uint32_t r) {
    const std::uint32_t n = ranks();
    std::vector<pollfd> fds;
    std::vector<std::uint32_t> sender;
    for (std::uint32_t s = 0; s < n; ++s) {
      if (s == r) continue;
      fds.push_back({in_[r * n + s].get(), POLLIN, 0});
      sender.push_back(s);
    }
    std::vector<FrameDecoder> decoders(fds.size());
    std::vector<std::byte> buf(64 * 1024);
    std::size_t open = fds.size();
    while (open > 0 && !stop_.load()) {
      const int rc = ::poll(fds.data(), fds.size(), 50);
      if (rc < 0 && errno != EINTR) break;
      if (rc <= 0) continue;
      for (std::size_t k = 0; k < fds.size(); ++k) {
        if (fds[k].fd < 0 || !(fds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
        const auto got = ::recv(fds[k].fd, buf.data(), buf.size(), 0);
        if (got > 0) {
          decoders[k].feed({buf.data(), static_cast<std::size_t>(got)},
                           [&](Frame f) { mailbox(r).push(sender[k], std::move(f)); });
        } else if (got == 0 || (errno != EINTR && errno != EAGAIN)) {
          fds[k].fd = -1;  // poll ignores negative descriptors
          --open;
        }
      }
    }
  }

  std::vector<detail::Fd> out_;  // [sender * ranks + receiver]
  std::vector<detail::Fd> in_;   // [receiver * ranks + sender]
  std::vector<std::thread> receivers_;
  std::atomic<bool> stop_{false};
};

inline std::unique_ptr<Transport> make_transport(TransportMedium m, std::uint32_t ranks) {
  if (m == TransportMedium::shared_queue) return std::make_unique<SharedQueueTransport>(ranks);
  return std::make_unique<LocalSocketTransport>(ranks);
}

}  // namespace taskbench
