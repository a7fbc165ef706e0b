// Copyright 2026 The QuicFuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Response-derived state codes and the inferred state machine.
//
// A state code packs (packet class << 12) | (signal << 4) | detail.
// The signal is the type of the dominant frame in the packet and the detail
// refines it: the last TLS handshake message type seen in CRYPTO data, or
// the CONNECTION_CLOSE error bucket.

#ifndef QUICFUZZ_STATE_MODEL_H_
#define QUICFUZZ_STATE_MODEL_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "quicfuzz/crypto.h"

namespace quicfuzz {

using StateCode = uint16_t;

inline constexpr StateCode kStartState = 0;

namespace packet_class {
inline constexpr uint8_t kInitial = 1;
inline constexpr uint8_t kHandshake = 2;
inline constexpr uint8_t kOneRtt = 3;
inline constexpr uint8_t kVersionNegotiation = 4;
inline constexpr uint8_t kOpaque = 15;
}  // namespace packet_class

namespace tls_detail {
inline constexpr uint8_t kFinished = 0xc;  // TLS type 20 does not fit a nibble
inline constexpr uint8_t kOther = 0xe;     // any other type >= 16
}  // namespace tls_detail

namespace close_bucket {
inline constexpr uint8_t kTransport = 1;
inline constexpr uint8_t kCrypto = 2;
inline constexpr uint8_t kApplication = 3;
}  // namespace close_bucket

constexpr StateCode MakeStateCode(uint8_t cls, uint8_t signal, uint8_t detail) {
  return static_cast<StateCode>((cls & 0xf) << 12 | signal << 4 | (detail & 0xf));
}

inline constexpr StateCode kOpaqueState = MakeStateCode(packet_class::kOpaque, 0, 0);

std::string FormatStateCode(StateCode code);

// A server packet as the fuzzer sees it.
struct ResponsePacket {
  PacketType type = PacketType::kOneRtt;
  bool decrypted = false;
  std::vector<Frame> frames;
};

// Splits and decrypts response datagrams. Packets that do not split or do
// not decrypt are reported with decrypted=false.
std::vector<ResponsePacket> DecodeResponses(std::span<const Bytes> datagrams,
                                            const SecretSet& secrets,
                                            size_t short_dcid_len);

// One code per packet. With `rich` false only the packet class is used,
// which is all a fuzzer without keys can observe.
StateCode ClassifyPacket(const ResponsePacket& packet, bool rich = true);
std::vector<StateCode> ExtractCodes(std::span<const ResponsePacket> packets, bool rich = true);

struct SelectionWeights {
  double fuzz_weight = 1.0;
  double novelty_weight = 0.5;
  double novelty_decay = 0.5;
};

class StateMachine {
 public:
  struct NodeStats {
    uint64_t hits = 0;
    uint64_t fuzz_count = 0;
    uint64_t selections = 0;
    double novelty = 1.0;
  };

  StateMachine();

  // Walks Start -> codes[0] -> codes[1] ... and returns true iff a node or
  // an edge was added.
  bool Update(std::span<const StateCode> codes);

  // Highest score w1/(1+fuzz_count) + w2*novelty among non-Start nodes,
  // ties to the lowest code. Decays the winner's novelty. Returns Start if
  // no other node exists.
  StateCode Select(const SelectionWeights& weights = {});
  void MarkFuzzed(StateCode code);

  const std::map<StateCode, NodeStats>& nodes() const { return nodes_; }
  const std::map<std::pair<StateCode, StateCode>, uint64_t>& edges() const { return edges_; }
  size_t size() const { return nodes_.size() + edges_.size(); }

  // "from -> to [count]" per line, codes in hex.
  std::string ExportEdges() const;

 private:
  std::map<StateCode, NodeStats> nodes_;
  std::map<std::pair<StateCode, StateCode>, uint64_t> edges_;
};

}  // namespace quicfuzz

#endif  // QUICFUZZ_STATE_MODEL_H_
