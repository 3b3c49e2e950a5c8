#ifndef XCLP_BUS_HPP_
#define XCLP_BUS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xclp/rng.hpp"

// In-process message bus. Parties never touch each other's state directly;
// every cross-party value goes through Bus::send, which records it in both
// parties' transcripts. The transcripts are what the privacy and
// communication-accounting tests inspect.

namespace xclp {

struct Envelope {
  std::uint64_t round_id = 0;
  std::string from;
  std::string to;
  std::string kind;
  std::uint64_t byte_len = 0;
  std::uint64_t elements = 0;  // logical element count for cost accounting
  std::string phase;
};

struct TranscriptRecord {
  Envelope envelope;
  std::uint64_t payload_hash = 0;
  bool sent = false;  // from this party's perspective
  std::vector<std::uint8_t> payload;  // populated only when the bus records payloads
};

struct PartyTranscript {
  std::string party_id;
  std::vector<TranscriptRecord> records;

  std::uint64_t bytes_sent(const std::string& phase = "") const {
    std::uint64_t total = 0;
    for (const auto& r : records)
      if (r.sent && (phase.empty() || r.envelope.phase == phase)) total += r.envelope.byte_len;
    return total;
  }

  std::uint64_t elements_sent_to(const std::string& to, const std::string& kind = "") const {
    std::uint64_t total = 0;
    for (const auto& r : records)
      if (r.sent && r.envelope.to == to && (kind.empty() || r.envelope.kind == kind))
        total += r.envelope.elements;
    return total;
  }
};

inline std::uint64_t hash_bytes(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Bus {
 public:
  explicit Bus(bool record_payloads = false) : record_payloads_(record_payloads) {}

  void set_phase(std::string phase) { phase_ = std::move(phase); }
  const std::string& phase() const { return phase_; }
  void set_round(std::uint64_t round_id) { round_id_ = round_id; }

  // Records the transfer; the caller hands the same bytes to the recipient
  // in-process. `elements` is the logical payload size in protocol units.
  void send(const std::string& from, const std::string& to, const std::string& kind,
            const std::vector<std::uint8_t>& payload, std::uint64_t elements) {
    Envelope env;
    env.round_id = round_id_;
    env.from = from;
    env.to = to;
    env.kind = kind;
    env.byte_len = payload.size();
    env.elements = elements;
    env.phase = phase_;
    std::uint64_t h = hash_bytes(payload);

    TranscriptRecord out{env, h, true, {}};
    TranscriptRecord in{env, h, false, {}};
    if (record_payloads_) {
      out.payload = payload;
      in.payload = payload;
    }
    transcript(from).records.push_back(std::move(out));
    transcript(to).records.push_back(std::move(in));
  }

  PartyTranscript& transcript(const std::string& party) {
    auto it = transcripts_.find(party);
    if (it == transcripts_.end()) {
      it = transcripts_.emplace(party, PartyTranscript{party, {}}).first;
    }
    return it->second;
  }

  const std::map<std::string, PartyTranscript>& transcripts() const { return transcripts_; }
  bool records_payloads() const { return record_payloads_; }

 private:
  bool record_payloads_;
  std::string phase_;
  std::uint64_t round_id_ = 0;
  std::map<std::string, PartyTranscript> transcripts_;
};

// Little-endian packing helpers used by every wire format in the project.
inline void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t read_u64(const std::vector<std::uint8_t>& bytes, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes.at(pos + i)) << (8 * i);
  return v;
}

inline std::vector<std::uint8_t> pack_u64s(const std::vector<std::uint64_t>& values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 8);
  for (std::uint64_t v : values) append_u64(out, v);
  return out;
}

inline std::vector<std::uint64_t> unpack_u64s(const std::vector<std::uint8_t>& bytes) {
  std::vector<std::uint64_t> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = read_u64(bytes, i * 8);
  return out;
}

}  // namespace xclp

#endif  // XCLP_BUS_HPP_
