#ifndef XCLP_OT_HPP_
#define XCLP_OT_HPP_

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "xclp/bus.hpp"
#include "xclp/rng.hpp"

// 1-out-of-2 oblivious transfer. The channel contract: the sender supplies
// value pairs (z0, z1), the receiver supplies choice bits and obtains z_b;
// the sender learns nothing about b, the receiver nothing about the other
// value. Two backends:
//   - DhOtChannel: Naor-Pinkas style OT over a prime-order subgroup of Z_p*,
//     honest-but-curious, with a deliberately small 512-bit test group.
//   - SimulatedOtChannel: trusted in-process exchange that produces the same
//     outputs and the same transcript shape without the group arithmetic.

namespace xclp {

class ObliviousTransferChannel {
 public:
  virtual ~ObliviousTransferChannel() = default;

  // Runs a batch of independent 1-of-2 transfers between two logical parties.
  // values[i] = (z0, z1) as ring elements; choices[i] in {0, 1}.
  virtual std::vector<std::uint64_t> transfer(
      const std::string& sender, const std::string& receiver,
      const std::vector<std::pair<std::uint64_t, std::uint64_t>>& values,
      const std::vector<std::uint8_t>& choices) = 0;
};

// Trusted in-process exchange. The transcript records one message of
// `values.size()` ring elements from sender to receiver, carrying only the
// values the receiver actually obtains (each of which is uniformly masked by
// protocol construction).
class SimulatedOtChannel : public ObliviousTransferChannel {
 public:
  explicit SimulatedOtChannel(Bus& bus) : bus_(bus) {}

  std::vector<std::uint64_t> transfer(
      const std::string& sender, const std::string& receiver,
      const std::vector<std::pair<std::uint64_t, std::uint64_t>>& values,
      const std::vector<std::uint8_t>& choices) override {
    if (values.size() != choices.size())
      throw std::invalid_argument("ot: values/choices length mismatch");
    std::vector<std::uint64_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      out[i] = choices[i] ? values[i].second : values[i].first;
    bus_.send(sender, receiver, "ot_transfer", pack_u64s(out), values.size());
    return out;
  }

 private:
  Bus& bus_;
};

namespace detail {

// 512-bit safe prime; generator 4 generates the order-(p-1)/2 subgroup.
// Test-profile group, far below production strength on purpose.
inline const char* kOtPrimeHex =
    "972a84682c833f05173a4869c8cbc2a17b38cd675a785ada347a3f4f7912c152"
    "477183d27248adbc7d6277208cd0a4af7bac81f60cce35a2390062ff476458ab";

inline std::uint64_t hash_group_element(const mpz_class& x, std::uint64_t tweak) {
  // FNV over the limb bytes, mixed with the per-transfer tweak.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(tweak);
  std::string s = x.get_str(16);
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

inline std::vector<std::uint8_t> mpz_to_bytes(const mpz_class& x, std::size_t width) {
  std::vector<std::uint8_t> out(width, 0);
  mpz_class v = x;
  for (std::size_t i = 0; i < width && v != 0; ++i) {
    out[i] = static_cast<std::uint8_t>(mpz_class(v & 0xff).get_ui());
    v >>= 8;
  }
  return out;
}

}  // namespace detail

class DhOtChannel : public ObliviousTransferChannel {
 public:
  DhOtChannel(Bus& bus, std::uint64_t seed)
      : bus_(bus), rng_(CounterRng::derived(seed, 0x07dd)), p_(mpz_class(detail::kOtPrimeHex, 16)) {
    q_ = (p_ - 1) / 2;
    g_ = 4;
    group_bytes_ = (mpz_sizeinbase(p_.get_mpz_t(), 2) + 7) / 8;
  }

  std::vector<std::uint64_t> transfer(
      const std::string& sender, const std::string& receiver,
      const std::vector<std::pair<std::uint64_t, std::uint64_t>>& values,
      const std::vector<std::uint8_t>& choices) override {
    if (values.size() != choices.size())
      throw std::invalid_argument("ot: values/choices length mismatch");
    const std::size_t m = values.size();

    // Sender: ephemeral exponent a, public A = g^a, and a group element C
    // with unknown discrete log to the receiver.
    mpz_class a = random_exponent();
    mpz_class A = powm(g_, a);
    mpz_class C = powm(g_, random_exponent());
    {
      std::vector<std::uint8_t> msg = detail::mpz_to_bytes(A, group_bytes_);
      auto cb = detail::mpz_to_bytes(C, group_bytes_);
      msg.insert(msg.end(), cb.begin(), cb.end());
      bus_.send(sender, receiver, "ot_setup", msg, 2);
    }

    // Receiver: per transfer, PK_b = g^k and PK_{1-b} = C / PK_b; sends PK_0.
    std::vector<mpz_class> ks(m), pk0(m);
    {
      std::vector<std::uint8_t> msg;
      for (std::size_t i = 0; i < m; ++i) {
        ks[i] = random_exponent();
        mpz_class pkb = powm(g_, ks[i]);
        pk0[i] = choices[i] ? mul(C, invert(pkb)) : pkb;
        auto b = detail::mpz_to_bytes(pk0[i], group_bytes_);
        msg.insert(msg.end(), b.begin(), b.end());
      }
      bus_.send(receiver, sender, "ot_pk", msg, m);
    }

    // Sender: encrypt both values under the two derived keys.
    std::vector<std::uint64_t> e0(m), e1(m);
    for (std::size_t i = 0; i < m; ++i) {
      mpz_class k0 = powm(pk0[i], a);
      mpz_class k1 = powm(mul(C, invert(pk0[i])), a);
      e0[i] = values[i].first ^ detail::hash_group_element(k0, 2 * i);
      e1[i] = values[i].second ^ detail::hash_group_element(k1, 2 * i + 1);
    }
    {
      std::vector<std::uint64_t> both;
      both.reserve(2 * m);
      for (std::size_t i = 0; i < m; ++i) {
        both.push_back(e0[i]);
        both.push_back(e1[i]);
      }
      bus_.send(sender, receiver, "ot_transfer", pack_u64s(both), m);
    }

    // Receiver: K = A^k decrypts the chosen ciphertext only.
    std::vector<std::uint64_t> out(m);
    for (std::size_t i = 0; i < m; ++i) {
      mpz_class key = powm(A, ks[i]);
      std::uint64_t pad = detail::hash_group_element(key, 2 * i + (choices[i] ? 1 : 0));
      out[i] = (choices[i] ? e1[i] : e0[i]) ^ pad;
    }
    return out;
  }

 private:
  mpz_class powm(const mpz_class& base, const mpz_class& exp) const {
    mpz_class r;
    mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), p_.get_mpz_t());
    return r;
  }
  mpz_class mul(const mpz_class& x, const mpz_class& y) const { return (x * y) % p_; }
  mpz_class invert(const mpz_class& x) const {
    mpz_class r;
    mpz_invert(r.get_mpz_t(), x.get_mpz_t(), p_.get_mpz_t());
    return r;
  }
  mpz_class random_exponent() {
    // 4 x 64 random bits, reduced mod q; bias is negligible for a 512-bit q.
    mpz_class x = 0;
    for (int i = 0; i < 8; ++i) {
      x <<= 64;
      x += mpz_class(rng_.next_u64());
    }
    return (x % (q_ - 1)) + 1;
  }

  Bus& bus_;
  CounterRng rng_;
  mpz_class p_, q_, g_;
  std::size_t group_bytes_;
};

}  // namespace xclp

#endif  // XCLP_OT_HPP_
