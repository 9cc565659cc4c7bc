#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace gibbsctrl {

// Number of worker threads: explicit request > GIBBSCTRL_THREADS > hardware.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GIBBSCTRL_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(task) for task = 0..n_tasks-1 on up to n_threads threads.
// Tasks must write to disjoint state; results are then independent of the
// thread count, which the reproducibility contract requires.
inline void parallel_for_tasks(int n_tasks, const std::function<void(int)>& fn,
                               int n_threads = 0) {
    n_threads = resolve_threads(n_threads);
    if (n_threads <= 1 || n_tasks <= 1) {
        for (int t = 0; t < n_tasks; ++t) fn(t);
        return;
    }
    if (n_threads > n_tasks) n_threads = n_tasks;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w]() {
            for (int t = w; t < n_tasks; t += n_threads) fn(t);
        });
    }
    for (auto& th : pool) th.join();
}

// Fixed-shape pairwise tree sum. The association order depends only on the
// element count, never on the thread count.
inline double pairwise_sum(std::span<const double> x) {
    const size_t n = x.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = x[0];
        for (size_t i = 1; i < n; ++i) s += x[i];
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

// SplitMix64 finalizer; used both for seeding and as a counter-based mixer.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// FNV-1a, used to stamp artifacts with a config fingerprint.
inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex16(uint64_t v);

// printf %.17g formatting; round-trips doubles exactly.
std::string format_double(double v);

}  // namespace gibbsctrl
