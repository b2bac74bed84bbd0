#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hashnet/error.hpp"

namespace hashnet {

/// Fixed-width bit vector packed into 64-bit words. Bit j lives at bit
/// (j % 64) of word (j / 64), i.e. bit 0 is the least significant bit of
/// word 0. Padding bits beyond the declared width are always zero, so two
/// vectors are equal exactly when their words compare equal.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t bit_count)
        : bit_count_(bit_count), words_((bit_count + 63) / 64, 0) {}

    std::size_t bit_count() const { return bit_count_; }
    std::span<const std::uint64_t> words() const { return words_; }

    bool test(std::size_t j) const {
        check_index(j);
        return (words_[j / 64] >> (j % 64)) & 1u;
    }

    void set(std::size_t j, bool value) {
        check_index(j);
        const std::uint64_t mask = std::uint64_t{1} << (j % 64);
        if (value) {
            words_[j / 64] |= mask;
        } else {
            words_[j / 64] &= ~mask;
        }
    }

    friend bool operator==(const BitVector&, const BitVector&) = default;

private:
    void check_index(std::size_t j) const {
        if (j >= bit_count_) {
            throw Error("bit index " + std::to_string(j) + " out of range for width " +
                        std::to_string(bit_count_));
        }
    }

    std::size_t bit_count_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Packs one byte per bit (0 or 1) into a BitVector of the same length.
BitVector pack_bits(const std::vector<std::uint8_t>& bits);

/// Inverse of pack_bits.
std::vector<std::uint8_t> unpack_bits(const BitVector& v);

/// Thresholds latent activations into a code: bit j = 1 iff
/// activations[j] > 0.5 (exactly 0.5 maps to 0). Activations must lie in
/// [0,1] and match the expected width.
BitVector binarize(std::span<const double> activations, std::size_t expected_bits);

/// Number of differing bits. Both vectors must have the same width.
std::size_t hamming(const BitVector& a, const BitVector& b);

/// One database entry: a stable image identifier, its class label index
/// and its packed code.
struct BinaryCode {
    std::string image_id;
    std::size_t label = 0;
    BitVector bits;

    friend bool operator==(const BinaryCode&, const BinaryCode&) = default;
};

/// An ordered code database. All codes share the width `bits`;
/// `label_names` is optional (empty means indices only).
struct CodeBook {
    std::size_t bits = 0;
    std::vector<std::string> label_names;
    std::vector<BinaryCode> codes;

    friend bool operator==(const CodeBook&, const CodeBook&) = default;
};

/// Enforces uniform width, unique image ids and in-vocabulary labels.
void validate(const CodeBook& book);

/// Lowercase hex rendering of a code, zero-padded to ceil(bits/4) digits;
/// bit 0 is the least significant bit of the value. code_from_hex is the
/// inverse and rejects strings with bits set beyond the declared width.
std::string code_to_hex(const BitVector& v);
BitVector code_from_hex(const std::string& hex, std::size_t bits);

/// Code file format: header lines `hashcodes 1`, `bits K`, `count N` and
/// an optional `labels name0 name1 ...` line, then one record per line:
/// `image_id label_index hex_code`. Whitespace-separated; ids must not
/// contain whitespace.
std::string codes_to_text(const CodeBook& book);
CodeBook parse_codes_text(const std::string& text, const std::string& origin = "<codes>");
void save_codes_file(const CodeBook& book, const std::string& path);
CodeBook load_codes_file(const std::string& path);

} // namespace hashnet
