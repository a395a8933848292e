#include "trajfuse/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>

namespace trajfuse {

int worker_count() {
    if (const char* env = std::getenv("TRAJFUSE_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(size_t n, const std::function<void(size_t, size_t)>& body, size_t chunk) {
    if (n == 0) return;
    int workers = worker_count();
    size_t nchunks = (n + chunk - 1) / chunk;
    if (workers <= 1 || nchunks <= 1) {
        body(0, n);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto run = [&] {
        try {
            for (;;) {
                size_t c = next.fetch_add(1);
                if (c >= nchunks) break;
                size_t lo = c * chunk;
                size_t hi = std::min(lo + chunk, n);
                body(lo, hi);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    int spawn = std::min<int>(workers, static_cast<int>(nchunks));
    pool.reserve(static_cast<size_t>(spawn));
    for (int i = 1; i < spawn; ++i) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace trajfuse
