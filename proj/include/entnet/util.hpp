#pragma once

#include <bit>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "entnet/errors.hpp"

namespace entnet {

inline constexpr double deg_to_rad(double deg) {
    return deg * std::numbers::pi / 180.0;
}

inline constexpr double rad_to_deg(double rad) {
    return rad * 180.0 / std::numbers::pi;
}

// splitmix64: seed expansion and label mixing for derived RNG streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic per-purpose substream seed: master seed mixed with a label.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t s = master ^ fnv1a64(label);
    return splitmix64(s);
}

// Strip a trailing carriage return so CRLF files read like LF files.
inline std::string trim_eol(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return line;
}

// Packed bit string. Bit 0 is the first (most significant for integer and
// hex readings) bit of the stream.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(std::size_t n) : size_(n), words_((n + 63) / 64, 0) {}

    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }

    bool get(std::size_t i) const {
        return (words_[i >> 6] >> (i & 63)) & 1ULL;
    }
    void set(std::size_t i, bool v) {
        const std::uint64_t mask = 1ULL << (i & 63);
        if (v)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }
    void push_back(bool v) {
        if ((size_ & 63) == 0) words_.push_back(0);
        if (v) words_[size_ >> 6] |= 1ULL << (size_ & 63);
        ++size_;
    }
    void flip(std::size_t i) { words_[i >> 6] ^= 1ULL << (i & 63); }

    std::size_t word_count() const noexcept { return words_.size(); }
    std::uint64_t word(std::size_t w) const { return words_[w]; }

    // 64-bit window starting at bit offset `bit` (zero padded past the end).
    std::uint64_t window(std::size_t bit) const {
        const std::size_t w = bit >> 6;
        const unsigned sh = static_cast<unsigned>(bit & 63);
        std::uint64_t lo = w < words_.size() ? words_[w] : 0;
        if (sh == 0) return lo;
        std::uint64_t hi = w + 1 < words_.size() ? words_[w + 1] : 0;
        return (lo >> sh) | (hi << (64 - sh));
    }

    std::size_t count_ones() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    BitVec slice(std::size_t begin, std::size_t len) const {
        BitVec out(len);
        for (std::size_t i = 0; i < len; ++i) out.set(i, get(begin + i));
        return out;
    }

    void append(const BitVec& other) {
        for (std::size_t i = 0; i < other.size(); ++i) push_back(other.get(i));
    }

    BitVec operator^(const BitVec& rhs) const {
        BitVec out(size_);
        for (std::size_t w = 0; w < words_.size(); ++w)
            out.words_[w] = words_[w] ^ rhs.words_[w];
        return out;
    }

    bool operator==(const BitVec& rhs) const {
        if (size_ != rhs.size_) return false;
        return words_ == rhs.words_;
    }

    // Hex text, MSB-first nibbles: bit 0 is the high bit of the first digit.
    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        out.reserve((size_ + 3) / 4);
        for (std::size_t i = 0; i < size_; i += 4) {
            unsigned v = 0;
            for (unsigned b = 0; b < 4 && i + b < size_; ++b)
                v |= static_cast<unsigned>(get(i + b)) << (3 - b);
            out.push_back(digits[v]);
        }
        return out;
    }

    static BitVec from_hex(std::string_view hex) {
        BitVec out;
        for (char c : hex) {
            unsigned v;
            if (c >= '0' && c <= '9')
                v = static_cast<unsigned>(c - '0');
            else if (c >= 'a' && c <= 'f')
                v = static_cast<unsigned>(c - 'a') + 10;
            else if (c >= 'A' && c <= 'F')
                v = static_cast<unsigned>(c - 'A') + 10;
            else
                throw domain_error("BitVec::from_hex: invalid hex digit");
            for (unsigned b = 0; b < 4; ++b) out.push_back((v >> (3 - b)) & 1);
        }
        return out;
    }

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace entnet
