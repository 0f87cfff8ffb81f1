#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dlsim {

// FLOP totals at 8B-scale configs overflow 64-bit once summed over a test
// set, so all cost accounting runs on 128-bit integers with explicit
// overflow checks. Overflow is an error, never a wrap.
using int128 = __int128;

class OverflowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline int128 checked_add(int128 a, int128 b) {
    int128 out;
    if (__builtin_add_overflow(a, b, &out))
        throw OverflowError("flop accumulator overflow (add)");
    return out;
}

inline int128 checked_mul(int128 a, int128 b) {
    int128 out;
    if (__builtin_mul_overflow(a, b, &out))
        throw OverflowError("flop accumulator overflow (mul)");
    return out;
}

std::string to_string(int128 value);
int128 parse_int128(const std::string& text);

inline double to_double(int128 value) { return static_cast<double>(value); }

} // namespace dlsim
