#include "psc/aes.hpp"

#include "psc/errors.hpp"

#include <bit>
#include <stdexcept>

namespace psc::aes {

namespace {

// S-box generated from the GF(2^8) inverse plus the affine transform rather
// than transcribed, so the table cannot be mistyped. Verified against the
// FIPS-197 known-answer vectors in the test suite.
struct Tables {
    std::array<std::uint8_t, 256> sbox{};
    std::array<std::uint8_t, 256> inv_sbox{};

    Tables() {
        std::array<std::uint8_t, 256> exp{};
        std::array<std::uint8_t, 256> log{};
        std::uint8_t x = 1;
        for (int i = 0; i < 255; ++i) {
            exp[static_cast<std::size_t>(i)] = x;
            log[x] = static_cast<std::uint8_t>(i);
            // multiply by the generator 0x03
            x = static_cast<std::uint8_t>(x ^ ((x << 1) ^ ((x & 0x80) ? 0x1b : 0)));
        }
        for (int v = 0; v < 256; ++v) {
            const std::uint8_t inv =
                (v == 0) ? 0 : exp[static_cast<std::size_t>(255 - log[static_cast<std::size_t>(v)])];
            std::uint8_t s = inv;
            std::uint8_t r = inv;
            for (int k = 0; k < 4; ++k) {
                r = static_cast<std::uint8_t>((r << 1) | (r >> 7));
                s ^= r;
            }
            s ^= 0x63;
            sbox[static_cast<std::size_t>(v)] = s;
            inv_sbox[s] = static_cast<std::uint8_t>(v);
        }
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

// xtime: multiplication by {02} in GF(2^8)
inline std::uint8_t xtime(std::uint8_t v) {
    return static_cast<std::uint8_t>((v << 1) ^ ((v & 0x80) ? 0x1b : 0));
}

inline void sub_bytes(Block& s) {
    const auto& sb = tables().sbox;
    for (auto& b : s)
        b = sb[b];
}

// Row r rotated left by r. new[4c+r] = old[4((c+r)%4)+r], the same permutation
// exposed as shiftrows_source().
constexpr std::array<std::uint8_t, 16> SHIFT_SRC = {0, 5, 10, 15, 4,  9,  14, 3,
                                                    8, 13, 2,  7,  12, 1,  6,  11};

inline void shift_rows(Block& s) {
    Block t;
    for (std::size_t p = 0; p < 16; ++p)
        t[p] = s[SHIFT_SRC[p]];
    s = t;
}

inline void mix_columns(Block& s) {
    for (std::size_t c = 0; c < 4; ++c) {
        std::uint8_t* col = s.data() + 4 * c;
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        const std::uint8_t t = static_cast<std::uint8_t>(a0 ^ a1 ^ a2 ^ a3);
        col[0] = static_cast<std::uint8_t>(a0 ^ t ^ xtime(static_cast<std::uint8_t>(a0 ^ a1)));
        col[1] = static_cast<std::uint8_t>(a1 ^ t ^ xtime(static_cast<std::uint8_t>(a1 ^ a2)));
        col[2] = static_cast<std::uint8_t>(a2 ^ t ^ xtime(static_cast<std::uint8_t>(a2 ^ a3)));
        col[3] = static_cast<std::uint8_t>(a3 ^ t ^ xtime(static_cast<std::uint8_t>(a3 ^ a0)));
    }
}

inline void add_round_key(Block& s, const Block& rk) {
    for (std::size_t i = 0; i < 16; ++i)
        s[i] ^= rk[i];
}

constexpr std::array<std::uint8_t, 11> RCON = {0x00, 0x01, 0x02, 0x04, 0x08, 0x10,
                                               0x20, 0x40, 0x80, 0x1b, 0x36};

} // namespace

const std::array<std::uint8_t, 256>& sbox_table() { return tables().sbox; }
const std::array<std::uint8_t, 256>& inv_sbox_table() { return tables().inv_sbox; }

std::uint8_t sbox(std::uint8_t v) { return tables().sbox[v]; }
std::uint8_t inv_sbox(std::uint8_t v) { return tables().inv_sbox[v]; }

std::size_t shiftrows_source(std::size_t pos) {
    if (pos >= 16)
        throw std::out_of_range("shiftrows_source: position " + std::to_string(pos) +
                                " outside 0..15");
    return SHIFT_SRC[pos];
}

std::array<Block, 11> expand_key(const Key& key) {
    std::array<Block, 11> rk;
    rk[0] = key;
    for (std::size_t round = 1; round <= 10; ++round) {
        const Block& prev = rk[round - 1];
        Block& cur = rk[round];
        // first word: prev word 0 ^ SubWord(RotWord(prev word 3)) ^ Rcon
        cur[0] = static_cast<std::uint8_t>(prev[0] ^ sbox(prev[13]) ^ RCON[round]);
        cur[1] = static_cast<std::uint8_t>(prev[1] ^ sbox(prev[14]));
        cur[2] = static_cast<std::uint8_t>(prev[2] ^ sbox(prev[15]));
        cur[3] = static_cast<std::uint8_t>(prev[3] ^ sbox(prev[12]));
        for (std::size_t i = 4; i < 16; ++i)
            cur[i] = static_cast<std::uint8_t>(prev[i] ^ cur[i - 4]);
    }
    return rk;
}

Key invert_key_schedule(const Block& round_key_10) {
    Block cur = round_key_10;
    for (std::size_t round = 10; round >= 1; --round) {
        Block prev;
        // words 1..3 of prev follow from cur alone
        for (std::size_t i = 15; i >= 4; --i)
            prev[i] = static_cast<std::uint8_t>(cur[i] ^ cur[i - 4]);
        // word 0 needs prev word 3, recovered just above
        prev[0] = static_cast<std::uint8_t>(cur[0] ^ sbox(prev[13]) ^ RCON[round]);
        prev[1] = static_cast<std::uint8_t>(cur[1] ^ sbox(prev[14]));
        prev[2] = static_cast<std::uint8_t>(cur[2] ^ sbox(prev[15]));
        prev[3] = static_cast<std::uint8_t>(cur[3] ^ sbox(prev[12]));
        cur = prev;
    }
    return cur;
}

EncryptionRecord encrypt(const Key& key, const Block& plaintext) {
    const auto rk = expand_key(key);

    EncryptionRecord rec;
    rec.plaintext = plaintext;
    rec.round_key_10 = rk[10];

    Block s = plaintext;
    add_round_key(s, rk[0]);
    for (std::size_t round = 1; round <= 9; ++round) {
        sub_bytes(s);
        shift_rows(s);
        mix_columns(s);
        add_round_key(s, rk[round]);
    }
    rec.round9_state = s;
    sub_bytes(s);
    shift_rows(s);
    add_round_key(s, rk[10]);
    rec.ciphertext = s;
    return rec;
}

TransitionCount register_transitions(const Block& before, const Block& after) {
    TransitionCount tc;
    for (std::size_t i = 0; i < 16; ++i) {
        const std::uint8_t b = before[i];
        const std::uint8_t a = after[i];
        tc.n01 += std::popcount(static_cast<unsigned>(static_cast<std::uint8_t>(~b & a)));
        tc.n10 += std::popcount(static_cast<unsigned>(static_cast<std::uint8_t>(b & ~a)));
    }
    tc.n_stable = 128 - tc.n01 - tc.n10;
    return tc;
}

std::string to_hex(const Block& b) {
    static const char* digits = "0123456789abcdef";
    std::string out(32, '0');
    for (std::size_t i = 0; i < 16; ++i) {
        out[2 * i] = digits[b[i] >> 4];
        out[2 * i + 1] = digits[b[i] & 0x0f];
    }
    return out;
}

Block block_from_hex(const std::string& hex) {
    if (hex.size() != 32)
        throw IoError("block hex must be 32 digits, got " + std::to_string(hex.size()) + ": " +
                      hex);
    auto nibble = [&](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9')
            return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f')
            return static_cast<std::uint8_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F')
            return static_cast<std::uint8_t>(c - 'A' + 10);
        throw IoError("bad hex digit in block: " + hex);
    };
    Block b;
    for (std::size_t i = 0; i < 16; ++i)
        b[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    return b;
}

} // namespace psc::aes
