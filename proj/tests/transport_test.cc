/*
 *
 * Copyright 2026 The trctee Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "trctee/transport.h"

#include <gtest/gtest.h>

#include <random>
#include <thread>

namespace trctee {
namespace {

void EchoRecords(Channel& ch, int n) {
  for (int i = 0; i < n; ++i) {
    auto r = ch.Receive(Millis(2000));
    if (!r.ok()) return;
    (void)ch.Send(*r);
  }
}

TEST(Transport, InProcessRecordsArriveIntact) {
  auto [a, b] = MakeInProcessChannelPair();
  std::mt19937_64 rng(1);
  std::vector<Bytes> sent;
  for (int i = 0; i < 200; ++i) {
    Bytes r(rng() % 3000);
    for (auto& x : r) x = uint8_t(rng());
    sent.push_back(r);
    ASSERT_TRUE(a->Send(r).ok());
  }
  for (const auto& r : sent) EXPECT_EQ(*b->Receive(Millis(1000)), r);
}

TEST(Transport, ReceiveTimesOut) {
  auto [a, b] = MakeInProcessChannelPair();
  EXPECT_EQ(b->Receive(Millis(20)).status().code(), ErrorCode::kTimeout);
}

TEST(Transport, CloseIsSeenByPeer) {
  auto [a, b] = MakeInProcessChannelPair();
  a->Close();
  EXPECT_EQ(b->Receive(Millis(500)).status().code(),
            ErrorCode::kTransportClosed);
}

TEST(Transport, TcpLoopbackEcho) {
  auto listener = TcpListener::Bind(HostPort{"127.0.0.1", 0});
  ASSERT_TRUE(listener.ok());
  std::unique_ptr<Channel> server;
  std::thread t([&] {
    server = std::move(*(*listener)->Accept(Millis(2000)));
    EchoRecords(*server, 50);
  });
  auto client = TcpConnect(HostPort{"127.0.0.1", (*listener)->port()});
  ASSERT_TRUE(client.ok()) << client.status().ToString();
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    Bytes r(1 + rng() % 70000);
    for (auto& x : r) x = uint8_t(rng());
    ASSERT_TRUE((*client)->Send(r).ok());
    EXPECT_EQ(*(*client)->Receive(Millis(2000)), r);
  }
  t.join();
}

TEST(Transport, ConnectToClosedPort) {
  uint16_t port;
  {
    auto l = TcpListener::Bind(HostPort{"127.0.0.1", 0});
    port = (*l)->port();
  }
  EXPECT_EQ(TcpConnect(HostPort{"127.0.0.1", port}).status().code(),
            ErrorCode::kConnectError);
}

TEST(Transport, BindTwiceIsBindError) {
  auto l = TcpListener::Bind(HostPort{"127.0.0.1", 0});
  ASSERT_TRUE(l.ok());
  EXPECT_EQ(
      TcpListener::Bind(HostPort{"127.0.0.1", (*l)->port()}).status().code(),
      ErrorCode::kBindError);
}

TEST(Transport, ParseHostPort) {
  auto hp = ParseHostPort("10.0.0.1:8080");
  ASSERT_TRUE(hp.ok());
  EXPECT_EQ(hp->host, "10.0.0.1");
  EXPECT_EQ(hp->port, 8080);
  EXPECT_FALSE(ParseHostPort("nocolon").ok());
  EXPECT_FALSE(ParseHostPort("h:99999").ok());
}

TEST(RecordingChannel, LogsBothDirections) {
  auto [a, b] = MakeInProcessChannelPair();
  RecordingChannel rec(*a);
  ASSERT_TRUE(rec.Send(Bytes{1}).ok());
  ASSERT_TRUE(b->Send(Bytes{2}).ok());
  ASSERT_TRUE(rec.Receive(Millis(500)).ok());
  Transcript t = rec.transcript();
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].direction, Direction::kOutbound);
  EXPECT_EQ(t[0].bytes, Bytes{1});
  EXPECT_EQ(t[1].direction, Direction::kInbound);
  EXPECT_EQ(t[1].bytes, Bytes{2});
}

TEST(TamperingChannel, FlipDropReplay) {
  auto [a, b] = MakeInProcessChannelPair();
  TamperingChannel tap(*a);
  tap.Arm({Direction::kOutbound, TamperAction::kFlipBit});
  ASSERT_TRUE(tap.Send(Bytes{0x01, 0x10}).ok());
  EXPECT_EQ(*b->Receive(Millis(500)), (Bytes{0x01, 0x11}));
  EXPECT_EQ(tap.fired(), 1u);

  tap.Arm({Direction::kOutbound, TamperAction::kDrop});
  ASSERT_TRUE(tap.Send(Bytes{0x02}).ok());
  EXPECT_EQ(b->Receive(Millis(50)).status().code(), ErrorCode::kTimeout);

  ASSERT_TRUE(b->Send(Bytes{0x03}).ok());
  EXPECT_EQ(*tap.Receive(Millis(500)), Bytes{0x03});
  tap.Arm({Direction::kInbound, TamperAction::kReplay});
  ASSERT_TRUE(b->Send(Bytes{0x04}).ok());
  EXPECT_EQ(*tap.Receive(Millis(500)), Bytes{0x03});
  EXPECT_EQ(*tap.Receive(Millis(500)), Bytes{0x04});
  EXPECT_EQ(tap.armed(), 0u);
}

TEST(TamperingChannel, DefaultMatchSkipsNonFrames) {
  auto [a, b] = MakeInProcessChannelPair();
  TamperingChannel tap(*a);
  tap.Arm({Direction::kOutbound, TamperAction::kDrop});
  ASSERT_TRUE(tap.Send(Bytes{0xFF, 0x01}).ok());  // handshake record
  EXPECT_EQ(*b->Receive(Millis(500)), (Bytes{0xFF, 0x01}));
  EXPECT_EQ(tap.armed(), 1u);
}

}  // namespace
}  // namespace trctee
