#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "ditra/hash.hpp"
#include "ditra/rng.hpp"
#include "ditra/tensor.hpp"

using namespace ditra;

namespace {

std::string sha_hex(const std::string& s) {
  return hex_digest(sha256_bytes(s.data(), s.size()));
}

}  // namespace

TEST_CASE("sha256 known-answer vectors") {
  CHECK(sha_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  std::string million(1000000, 'a');
  CHECK(sha_hex(million) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("tensor group digest is order- and value-sensitive") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({1, 3}, {5, 6, 7});

  Digest d1 = sha256_tensors({a, b});
  Digest d2 = sha256_tensors({a, b});
  CHECK(d1 == d2);
  CHECK(hex_digest(d1).size() == 64);

  Digest swapped = sha256_tensors({b, a});
  CHECK(d1 != swapped);

  Tensor a2 = Tensor::from({2, 2}, {1, 2, 3, 4.000001});
  CHECK(sha256_tensors({a2, b}) != d1);

  // shape matters even when the payload bytes agree
  Tensor flat = Tensor::from({1, 4}, {1, 2, 3, 4});
  CHECK(sha256_tensors({flat, b}) != d1);
}

TEST_CASE("rng streams are reproducible and forks are independent") {
  Rng a(999), b(999);
  std::vector<std::uint64_t> xs, ys;
  for (int i = 0; i < 64; ++i) {
    xs.push_back(a.next_u64());
    ys.push_back(b.next_u64());
  }
  CHECK(xs == ys);

  // forking must not perturb the parent stream
  Rng c(999);
  for (int i = 0; i < 10; ++i) c.next_u64();
  Rng child = c.fork(42);
  (void)child.next_u64();
  Rng d(999);
  for (int i = 0; i < 10; ++i) d.next_u64();
  CHECK(c.next_u64() == d.next_u64());

  // same salt, same point in the stream -> same child
  Rng e(7), f(7);
  CHECK(e.fork(5).next_u64() == f.fork(5).next_u64());
  CHECK(e.fork(5).next_u64() != e.fork(6).next_u64());
}

TEST_CASE("rng permutation is a permutation and shuffle is deterministic") {
  Rng r(13);
  std::vector<int> p = r.permutation(20);
  std::vector<int> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) CHECK(sorted[std::size_t(i)] == i);

  Rng r2(13);
  CHECK(r2.permutation(20) == p);
}
