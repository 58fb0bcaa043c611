#include "zeroscatter/common.hpp"

namespace zs {

namespace {

constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

uint64_t seed_stream(uint64_t base, const std::string& label, uint64_t a, uint64_t b) {
    uint64_t h = fnv1a(kFnvOffset, label.data(), label.size());
    h = fnv1a(h, &base, sizeof(base));
    h = fnv1a(h, &a, sizeof(a));
    h = fnv1a(h, &b, sizeof(b));
    return mix64(h);
}

uint64_t bytes_checksum(const void* data, size_t n) { return fnv1a(kFnvOffset, data, n); }

}  // namespace zs
