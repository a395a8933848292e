#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace trajfuse {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

    double norm() const { return std::hypot(x, y); }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

inline Vec2 midpoint(const Vec2& a, const Vec2& b) { return {(a.x + b.x) * 0.5, (a.y + b.y) * 0.5}; }

// Base for every pipeline error so callers can catch the whole family.
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define TRAJFUSE_ERROR(Name)                         \
    struct Name : PipelineError {                    \
        using PipelineError::PipelineError;          \
    }

TRAJFUSE_ERROR(MissingFrames);
TRAJFUSE_ERROR(DimensionMismatch);
TRAJFUSE_ERROR(TooShort);
TRAJFUSE_ERROR(InvalidSpec);
TRAJFUSE_ERROR(DegenerateFit);
TRAJFUSE_ERROR(ClipTooShort);
TRAJFUSE_ERROR(OutOfBounds);
TRAJFUSE_ERROR(ParseError);
TRAJFUSE_ERROR(InvariantViolation);
TRAJFUSE_ERROR(KeyFrameOutOfRange);
TRAJFUSE_ERROR(DegenerateTorso);
TRAJFUSE_ERROR(NoJoints);
TRAJFUSE_ERROR(TooFewSamples);
TRAJFUSE_ERROR(SingleClass);
TRAJFUSE_ERROR(EmptyFeatures);
TRAJFUSE_ERROR(NegativeInput);
TRAJFUSE_ERROR(ClipMismatch);
TRAJFUSE_ERROR(ClassUniverseMismatch);
TRAJFUSE_ERROR(NoPositives);
TRAJFUSE_ERROR(EmptySubset);
TRAJFUSE_ERROR(UnknownMeasure);
TRAJFUSE_ERROR(NTooLarge);
TRAJFUSE_ERROR(MissingAnnotations);
TRAJFUSE_ERROR(StaleArtifacts);
TRAJFUSE_ERROR(OrderMismatch);
TRAJFUSE_ERROR(IoError);

#undef TRAJFUSE_ERROR

// Deterministic RNG. Wraps mt19937_64 but derives floats by hand so the
// stream does not depend on libstdc++ distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        // splitmix64: tiny state, good quality, trivially portable.
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

    // standard normal via Box-Muller (always consumes two draws)
    double next_gaussian() {
        double u1 = next_double(), u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

// Worker cap: TRAJFUSE_THREADS env var, else hardware concurrency.
int worker_count();

// Deterministic parallel loop: fixed chunking independent of thread count,
// so any reduction combined in chunk order is bit-stable.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& body, size_t chunk = 64);

// FNV-1a over a string; used for config/content hashes in stage manifests.
uint64_t fnv1a64(const std::string& s);
std::string hash_hex(uint64_t h);

}  // namespace trajfuse
