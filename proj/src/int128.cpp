#include "dlsim/int128.hpp"

namespace dlsim {

std::string to_string(int128 value) {
    if (value == 0) return "0";
    bool negative = value < 0;
    // Negate via unsigned to survive INT128_MIN.
    unsigned __int128 mag = negative ? -static_cast<unsigned __int128>(value)
                                     : static_cast<unsigned __int128>(value);
    std::string digits;
    while (mag > 0) {
        digits.push_back(static_cast<char>('0' + static_cast<int>(mag % 10)));
        mag /= 10;
    }
    if (negative) digits.push_back('-');
    return {digits.rbegin(), digits.rend()};
}

int128 parse_int128(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty integer literal");
    size_t i = 0;
    bool negative = false;
    if (text[0] == '-' || text[0] == '+') {
        negative = text[0] == '-';
        i = 1;
    }
    if (i == text.size()) throw std::invalid_argument("sign without digits: " + text);
    int128 value = 0;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (c < '0' || c > '9')
            throw std::invalid_argument("invalid digit in integer literal: " + text);
        value = checked_mul(value, 10);
        value = checked_add(value, negative ? -(c - '0') : (c - '0'));
    }
    return value;
}

} // namespace dlsim
