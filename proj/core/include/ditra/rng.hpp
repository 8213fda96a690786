#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ditra {

// Deterministic splitmix64 generator. Self-contained so streams are
// bit-identical across platforms and standard libraries; everything that
// claims "reproducible from seed" routes through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 bits of mantissa
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // [0, n), unbiased via rejection
  int next_int(int n) {
    std::uint64_t bound = ~0ULL - ~0ULL % std::uint64_t(n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= bound);
    return int(x % std::uint64_t(n));
  }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = int(v.size()) - 1; i > 0; --i) {
      std::swap(v[size_t(i)], v[size_t(next_int(i + 1))]);
    }
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p[size_t(i)] = i;
    shuffle(p);
    return p;
  }

  // Derive an independent child stream; salt keeps siblings apart.
  Rng fork(std::uint64_t salt) {
    Rng r(state_ ^ (salt * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL));
    r.next_u64();
    return r;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ditra
