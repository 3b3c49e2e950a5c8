#ifndef XCLP_PAILLIER_HPP_
#define XCLP_PAILLIER_HPP_

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "xclp/rng.hpp"

// Paillier cryptosystem (additively homomorphic). Standard construction with
// g = N + 1, so encryption is (1 + mN) * r^N mod N^2. Key sizes below 2048
// bits are a test profile and not secure.

namespace xclp {

struct PaillierPublicKey {
  mpz_class n;
  mpz_class n_squared;

  mpz_class add(const mpz_class& c1, const mpz_class& c2) const {
    return (c1 * c2) % n_squared;
  }
  mpz_class sub(const mpz_class& c1, const mpz_class& c2) const {
    mpz_class inv;
    if (mpz_invert(inv.get_mpz_t(), c2.get_mpz_t(), n_squared.get_mpz_t()) == 0)
      throw std::runtime_error("paillier: ciphertext not invertible");
    return (c1 * inv) % n_squared;
  }
  mpz_class mul_plain(const mpz_class& c, const mpz_class& k) const {
    mpz_class r;
    mpz_class e = k % n;
    if (e < 0) e += n;
    mpz_powm(r.get_mpz_t(), c.get_mpz_t(), e.get_mpz_t(), n_squared.get_mpz_t());
    return r;
  }
};

class PaillierKeypair {
 public:
  // Deterministic keygen from a seed; bits is the modulus size.
  static PaillierKeypair generate(int bits, std::uint64_t seed) {
    if (bits < 64) throw std::invalid_argument("paillier: modulus too small");
    CounterRng rng = CounterRng::derived(seed, 0x9a111e);
    gmp_randstate_t state;
    gmp_randinit_mt(state);
    gmp_randseed_ui(state, rng.next_u64());

    PaillierKeypair kp;
    mpz_class p, q;
    do {
      mpz_urandomb(p.get_mpz_t(), state, bits / 2);
      mpz_setbit(p.get_mpz_t(), bits / 2 - 1);
      mpz_nextprime(p.get_mpz_t(), p.get_mpz_t());
      mpz_urandomb(q.get_mpz_t(), state, bits / 2);
      mpz_setbit(q.get_mpz_t(), bits / 2 - 1);
      mpz_nextprime(q.get_mpz_t(), q.get_mpz_t());
    } while (p == q);
    gmp_randclear(state);

    kp.pub_.n = p * q;
    kp.pub_.n_squared = kp.pub_.n * kp.pub_.n;
    kp.lambda_ = (p - 1) * (q - 1) / gcd(p - 1, q - 1);  // lcm
    // mu = (L(g^lambda mod N^2))^-1 mod N; with g = N+1, L(g^lambda) = lambda mod N.
    mpz_class glambda;
    mpz_class g = kp.pub_.n + 1;
    mpz_powm(glambda.get_mpz_t(), g.get_mpz_t(), kp.lambda_.get_mpz_t(),
             kp.pub_.n_squared.get_mpz_t());
    mpz_class l = (glambda - 1) / kp.pub_.n;
    if (mpz_invert(kp.mu_.get_mpz_t(), l.get_mpz_t(), kp.pub_.n.get_mpz_t()) == 0)
      throw std::runtime_error("paillier: keygen failed (L not invertible)");
    kp.enc_rng_ = CounterRng::derived(seed, 0xe2c);
    return kp;
  }

  const PaillierPublicKey& pub() const { return pub_; }

  mpz_class encrypt(const mpz_class& m) {
    mpz_class msg = m % pub_.n;
    if (msg < 0) msg += pub_.n;
    mpz_class r = random_unit();
    mpz_class rn;
    mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pub_.n.get_mpz_t(), pub_.n_squared.get_mpz_t());
    mpz_class gm = (1 + msg * pub_.n) % pub_.n_squared;
    return (gm * rn) % pub_.n_squared;
  }

  mpz_class decrypt(const mpz_class& c) const {
    if (c <= 0 || c >= pub_.n_squared)
      throw std::invalid_argument("paillier: ciphertext out of range");
    mpz_class u;
    mpz_powm(u.get_mpz_t(), c.get_mpz_t(), lambda_.get_mpz_t(), pub_.n_squared.get_mpz_t());
    mpz_class l = (u - 1) / pub_.n;
    return (l * mu_) % pub_.n;
  }

  // Decode a plaintext that represents a signed value in (-N/2, N/2).
  mpz_class decrypt_signed(const mpz_class& c) const {
    mpz_class m = decrypt(c);
    if (m > pub_.n / 2) m -= pub_.n;
    return m;
  }

  mpz_class random_plaintext() {
    std::size_t bits = mpz_sizeinbase(pub_.n.get_mpz_t(), 2);
    mpz_class x = 0;
    for (std::size_t i = 0; i < (bits + 63) / 64; ++i) {
      x <<= 64;
      x += mpz_class(enc_rng_.next_u64());
    }
    return x % pub_.n;
  }

 private:
  static mpz_class gcd(const mpz_class& a, const mpz_class& b) {
    mpz_class r;
    mpz_gcd(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return r;
  }

  mpz_class random_unit() {
    mpz_class r;
    do {
      r = random_plaintext();
    } while (r == 0 || gcd(r, pub_.n) != 1);
    return r;
  }

  PaillierPublicKey pub_;
  mpz_class lambda_;
  mpz_class mu_;
  CounterRng enc_rng_{0};
};

// Ciphertext wire encoding: fixed-width little-endian bytes of the ciphertext.
inline std::vector<std::uint8_t> paillier_ct_bytes(const mpz_class& c,
                                                   const PaillierPublicKey& pub) {
  std::size_t width = (mpz_sizeinbase(pub.n_squared.get_mpz_t(), 2) + 7) / 8;
  std::vector<std::uint8_t> out(width, 0);
  mpz_class v = c;
  for (std::size_t i = 0; i < width && v != 0; ++i) {
    out[i] = static_cast<std::uint8_t>(mpz_class(v & 0xff).get_ui());
    v >>= 8;
  }
  return out;
}

}  // namespace xclp

#endif  // XCLP_PAILLIER_HPP_
