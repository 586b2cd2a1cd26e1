#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "taskbench/backends/transport.hpp"

using namespace taskbench;

namespace {

std::vector<std::byte> bytes_of(std::size_t n, std::uint8_t salt) {
  std::vector<std::byte> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<std::byte>((k * 31 + salt) & 0xff);
  return v;
}

}  // namespace

TEST(Frame, HeaderIsLittleEndianLengthThenEdge) {
  const auto f = encode_frame(0x01020304, bytes_of(5, 0));
  ASSERT_EQ(f.size(), kFrameHeaderBytes + 5);
  EXPECT_EQ(f[0], std::byte{5});
  EXPECT_EQ(f[3], std::byte{0});
  EXPECT_EQ(f[4], std::byte{0x04});
  EXPECT_EQ(f[7], std::byte{0x01});
}

// Property: any byte-level split of a frame stream decodes to the same frames.
TEST(Frame, DecoderIsIndependentOfChunking) {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Frame> sent;
    std::vector<std::byte> stream;
    const int frames = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < frames; ++k) {
      Frame f{static_cast<std::uint32_t>(rng()), bytes_of(rng() % 300, static_cast<std::uint8_t>(k))};
      const auto enc = encode_frame(f.edge_id, f.payload);
      stream.insert(stream.end(), enc.begin(), enc.end());
      sent.push_back(std::move(f));
    }
    FrameDecoder dec;
    std::vector<Frame> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const std::size_t n = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 40);
      dec.feed({stream.data() + pos, n}, [&](Frame f) { got.push_back(std::move(f)); });
      pos += n;
    }
    ASSERT_EQ(got, sent) << "trial " << trial;
    EXPECT_EQ(dec.buffered(), 0u);
  }
}

TEST(Frame, PartialFrameStaysBuffered) {
  const auto enc = encode_frame(9, bytes_of(10, 1));
  FrameDecoder dec;
  int seen = 0;
  dec.feed({enc.data(), enc.size() - 1}, [&](Frame) { ++seen; });
  EXPECT_EQ(seen, 0);
  EXPECT_EQ(dec.buffered(), enc.size() - 1);
  dec.feed({enc.data() + enc.size() - 1, 1}, [&](Frame) { ++seen; });
  EXPECT_EQ(seen, 1);
}

class TransportMedia : public ::testing::TestWithParam<TransportMedium> {};

TEST_P(TransportMedia, DeliversPerSenderInOrder) {
  constexpr std::uint32_t ranks = 3, per_pair = 200;
  auto net = make_transport(GetParam(), ranks);
  std::vector<std::thread> senders;
  for (std::uint32_t s = 0; s < ranks; ++s)
    senders.emplace_back([&, s] {
      for (std::uint32_t k = 0; k < per_pair; ++k)
        for (std::uint32_t r = 0; r < ranks; ++r)
          if (r != s) net->send(s, r, s * 1000 + k, bytes_of(k % 97, static_cast<std::uint8_t>(s)));
      net->finish_sender(s);
    });
  for (std::uint32_t r = 0; r < ranks; ++r)
    for (std::uint32_t s = 0; s < ranks; ++s) {
      if (s == r) continue;
      for (std::uint32_t k = 0; k < per_pair; ++k) {
        const Frame f = net->receive(r, s);
        ASSERT_EQ(f.edge_id, s * 1000 + k);
        ASSERT_EQ(f.payload, bytes_of(k % 97, static_cast<std::uint8_t>(s)));
      }
    }
  for (auto& t : senders) t.join();
}

TEST_P(TransportMedia, AbortWakesBlockedReceivers) {
  auto net = make_transport(GetParam(), 2);
  std::thread waiter([&] { EXPECT_THROW(net->receive(0, 1), TransportAborted); });
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  net->abort();
  waiter.join();
}

INSTANTIATE_TEST_SUITE_P(Media, TransportMedia,
                         ::testing::Values(TransportMedium::shared_queue, TransportMedium::local_socket),
                         [](const auto& info) { return std::string(to_string(info.param)); });
