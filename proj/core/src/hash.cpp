#include "ditra/hash.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <memory>
#include <stdexcept>

namespace ditra {

namespace {

struct CtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
using Ctx = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;

Ctx new_sha256() {
  Ctx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
  return ctx;
}

Digest finish(Ctx ctx) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    throw std::runtime_error("sha256 final failed");
  }
  return out;
}

void update(Ctx& ctx, const void* data, std::size_t n) {
  if (EVP_DigestUpdate(ctx.get(), data, n) != 1) {
    throw std::runtime_error("sha256 update failed");
  }
}

}  // namespace

Digest sha256_bytes(const void* data, std::size_t n) {
  Ctx ctx = new_sha256();
  update(ctx, data, n);
  return finish(std::move(ctx));
}

Digest sha256_tensors(const std::vector<Tensor>& ts) {
  Ctx ctx = new_sha256();
  for (const Tensor& t : ts) {
    const std::uint32_t rank = std::uint32_t(t.rank());
    update(ctx, &rank, sizeof(rank));
    for (int e : t.shape()) {
      const std::uint32_t ext = std::uint32_t(e);
      update(ctx, &ext, sizeof(ext));
    }
    update(ctx, t.data(), t.size() * sizeof(double));
  }
  return finish(std::move(ctx));
}

std::string hex_digest(const Digest& d) {
  static const char* k = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : d) {
    out.push_back(k[b >> 4]);
    out.push_back(k[b & 0xf]);
  }
  return out;
}

}  // namespace ditra
