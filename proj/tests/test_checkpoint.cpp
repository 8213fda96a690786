#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ditra/checkpoint.hpp"
#include "ditra/error.hpp"
#include "ditra/hash.hpp"
#include "ditra/rng.hpp"
#include "ditra/tensor.hpp"

using namespace ditra;

namespace {

Checkpoint sample_checkpoint() {
  Rng rng(404);
  Checkpoint ck;
  ck.tensors.emplace_back("alpha", Tensor::gaussian({3, 4}, rng, 1.0));
  ck.tensors.emplace_back("beta", Tensor::from({1, 2}, {-1.5, 2.25}));
  ck.config_text = "stage1_steps = 5\n# trailing comment\n";
  ck.frozen_hashes.emplace_back(
      "group_a", sha256_tensors({ck.tensors[0].second}));
  return ck;
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("checkpoints round-trip bit-exactly") {
  TempFile f("test_ck_roundtrip.ckpt");
  Checkpoint ck = sample_checkpoint();
  save_checkpoint(f.path, ck);
  Checkpoint back = load_checkpoint(f.path);

  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    CHECK(back.tensors[i].first == ck.tensors[i].first);
    CHECK(back.tensors[i].second.rows() == ck.tensors[i].second.rows());
    CHECK(back.tensors[i].second.cols() == ck.tensors[i].second.cols());
    CHECK(back.tensors[i].second.values() == ck.tensors[i].second.values());
  }
  CHECK(back.config_text == ck.config_text);
  REQUIRE(back.frozen_hashes.size() == 1);
  CHECK(back.frozen_hashes[0].first == "group_a");
  CHECK(back.frozen_hashes[0].second == ck.frozen_hashes[0].second);

  // save -> load -> save produces identical bytes
  TempFile g("test_ck_again.ckpt");
  save_checkpoint(g.path, back);
  CHECK(read_bytes(g.path) == read_bytes(f.path));
}

TEST_CASE("find helpers") {
  Checkpoint ck = sample_checkpoint();
  REQUIRE(ck.find("alpha") != nullptr);
  CHECK(ck.find("alpha")->rows() == 3);
  CHECK(ck.find("gamma") == nullptr);
  REQUIRE(ck.find_hash("group_a") != nullptr);
  CHECK(ck.find_hash("group_b") == nullptr);
}

TEST_CASE("verify_frozen_hash accepts the right digest, rejects the rest") {
  Checkpoint ck = sample_checkpoint();
  CHECK_NOTHROW(
      verify_frozen_hash(ck, "group_a", ck.frozen_hashes[0].second));

  Digest wrong = ck.frozen_hashes[0].second;
  wrong[0] ^= 0xFF;
  try {
    verify_frozen_hash(ck, "group_a", wrong);
    CHECK(false);
  } catch (const CheckpointError& e) {
    CHECK(e.kind == CheckpointError::Kind::hash_mismatch);
  }
  // a missing group is also a hard failure
  CHECK_THROWS_AS(verify_frozen_hash(ck, "group_b", wrong), CheckpointError);
}

TEST_CASE("corrupted files are rejected with the right category") {
  TempFile f("test_ck_corrupt.ckpt");
  save_checkpoint(f.path, sample_checkpoint());
  std::vector<char> bytes = read_bytes(f.path);

  SUBCASE("bad magic") {
    std::vector<char> b = bytes;
    b[0] = 'X';
    write_bytes(f.path, b);
    try {
      (void)load_checkpoint(f.path);
      CHECK(false);
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::bad_magic);
    }
  }
  SUBCASE("truncated payload") {
    std::vector<char> b(bytes.begin(), bytes.begin() + long(bytes.size()) / 2);
    write_bytes(f.path, b);
    try {
      (void)load_checkpoint(f.path);
      CHECK(false);
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::truncated);
    }
  }
  SUBCASE("trailing garbage") {
    std::vector<char> b = bytes;
    b.push_back('!');
    write_bytes(f.path, b);
    try {
      (void)load_checkpoint(f.path);
      CHECK(false);
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::malformed);
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)load_checkpoint("no_such_checkpoint.ckpt"),
                    CheckpointError);
  }
}
