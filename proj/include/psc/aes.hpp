#ifndef PSC_AES_HPP
#define PSC_AES_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace psc::aes {

// 128-bit block in standard AES byte order: state[row][col] = bytes[4*col + row].
using Block = std::array<std::uint8_t, 16>;
using Key = Block;

// One encryption plus the register states the power model needs: the round-9
// state is the content of the 128-bit round register before the final-round
// update, the ciphertext its content after.
struct EncryptionRecord {
    Block plaintext{};
    Block ciphertext{};
    Block round9_state{};
    Block round_key_10{};
};

struct TransitionCount {
    int n01 = 0;      // bits rising 0 -> 1
    int n10 = 0;      // bits falling 1 -> 0
    int n_stable = 0; // unchanged bits; n01 + n10 + n_stable == 128
};

const std::array<std::uint8_t, 256>& sbox_table();
const std::array<std::uint8_t, 256>& inv_sbox_table();

std::uint8_t sbox(std::uint8_t v);
std::uint8_t inv_sbox(std::uint8_t v);

// Round-9 position whose byte, after SubBytes and ShiftRows, lands at
// ciphertext position pos. Throws std::out_of_range for pos > 15.
std::size_t shiftrows_source(std::size_t pos);

// Full AES-128 key schedule, round 0 (= cipher key) through round 10.
std::array<Block, 11> expand_key(const Key& key);

// Inverts the schedule: round-10 round key back to the cipher key.
Key invert_key_schedule(const Block& round_key_10);

EncryptionRecord encrypt(const Key& key, const Block& plaintext);

TransitionCount register_transitions(const Block& before, const Block& after);

// Hex helpers for the 32-hex-digit block encoding used by every file format.
std::string to_hex(const Block& b);
Block block_from_hex(const std::string& hex); // throws IoError on bad input

} // namespace psc::aes

#endif
