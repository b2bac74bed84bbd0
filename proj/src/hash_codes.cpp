#include "hashnet/hash_codes.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace hashnet {

BitVector pack_bits(const std::vector<std::uint8_t>& bits) {
    BitVector v(bits.size());
    for (std::size_t j = 0; j < bits.size(); ++j) {
        if (bits[j] > 1) {
            throw Error("pack_bits: element " + std::to_string(j) + " is not a bit");
        }
        if (bits[j]) v.set(j, true);
    }
    return v;
}

std::vector<std::uint8_t> unpack_bits(const BitVector& v) {
    std::vector<std::uint8_t> bits(v.bit_count());
    for (std::size_t j = 0; j < bits.size(); ++j) bits[j] = v.test(j) ? 1 : 0;
    return bits;
}

BitVector binarize(std::span<const double> activations, std::size_t expected_bits) {
    if (activations.size() != expected_bits) {
        throw Error("binarize: expected " + std::to_string(expected_bits) +
                    " activations, got " + std::to_string(activations.size()));
    }
    BitVector v(expected_bits);
    for (std::size_t j = 0; j < activations.size(); ++j) {
        const double a = activations[j];
        if (!(a >= 0.0 && a <= 1.0)) {
            throw Error("binarize: activation " + std::to_string(j) + " is outside [0,1]");
        }
        // Strict threshold: exactly 0.5 keeps the bit at 0.
        if (a > 0.5) v.set(j, true);
    }
    return v;
}

std::size_t hamming(const BitVector& a, const BitVector& b) {
    if (a.bit_count() != b.bit_count()) {
        throw Error("hamming: width mismatch (" + std::to_string(a.bit_count()) + " vs " +
                    std::to_string(b.bit_count()) + ")");
    }
    std::size_t count = 0;
    const auto wa = a.words();
    const auto wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) {
        count += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    }
    return count;
}

void validate(const CodeBook& book) {
    std::unordered_set<std::string> ids;
    ids.reserve(book.codes.size());
    for (std::size_t i = 0; i < book.codes.size(); ++i) {
        const BinaryCode& c = book.codes[i];
        if (c.bits.bit_count() != book.bits) {
            throw Error("codebook entry '" + c.image_id + "' has width " +
                        std::to_string(c.bits.bit_count()) + ", book declares " +
                        std::to_string(book.bits));
        }
        if (!ids.insert(c.image_id).second) {
            throw Error("codebook: duplicate image id '" + c.image_id + "'");
        }
        if (!book.label_names.empty() && c.label >= book.label_names.size()) {
            throw Error("codebook entry '" + c.image_id + "' has label " +
                        std::to_string(c.label) + " outside the vocabulary of " +
                        std::to_string(book.label_names.size()));
        }
    }
}

std::string code_to_hex(const BitVector& v) {
    static const char digits[] = "0123456789abcdef";
    const std::size_t nibbles = (v.bit_count() + 3) / 4;
    std::string hex(nibbles, '0');
    const auto words = v.words();
    for (std::size_t i = 0; i < nibbles; ++i) {
        const std::size_t low_bit = (nibbles - 1 - i) * 4;  // most significant nibble first
        const std::uint64_t word = words[low_bit / 64];
        hex[i] = digits[(word >> (low_bit % 64)) & 0xf];
    }
    return hex;
}

BitVector code_from_hex(const std::string& hex, std::size_t bits) {
    const std::size_t nibbles = (bits + 3) / 4;
    if (hex.size() != nibbles) {
        throw Error("hex code '" + hex + "': expected " + std::to_string(nibbles) +
                    " digits for width " + std::to_string(bits));
    }
    BitVector v(bits);
    for (std::size_t i = 0; i < nibbles; ++i) {
        const char c = hex[i];
        std::uint64_t nib = 0;
        if (c >= '0' && c <= '9') {
            nib = static_cast<std::uint64_t>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            nib = static_cast<std::uint64_t>(c - 'a' + 10);
        } else {
            throw Error("hex code '" + hex + "': invalid digit '" + std::string(1, c) + "'");
        }
        const std::size_t low_bit = (nibbles - 1 - i) * 4;
        for (std::size_t b = 0; b < 4; ++b) {
            if (!(nib & (std::uint64_t{1} << b))) continue;
            const std::size_t j = low_bit + b;
            if (j >= bits) {
                throw Error("hex code '" + hex + "': bit set beyond declared width " +
                            std::to_string(bits));
            }
            v.set(j, true);
        }
    }
    return v;
}

std::string codes_to_text(const CodeBook& book) {
    validate(book);
    std::ostringstream os;
    os << "hashcodes 1\n";
    os << "bits " << book.bits << "\n";
    os << "count " << book.codes.size() << "\n";
    if (!book.label_names.empty()) {
        os << "labels";
        for (const std::string& name : book.label_names) os << " " << name;
        os << "\n";
    }
    for (const BinaryCode& c : book.codes) {
        os << c.image_id << " " << c.label << " " << code_to_hex(c.bits) << "\n";
    }
    return os.str();
}

namespace {

[[noreturn]] void fail_line(const std::string& origin, std::size_t line_no,
                            const std::string& msg) {
    throw Error(origin + ", line " + std::to_string(line_no) + ": " + msg);
}

std::size_t parse_count_tok(const std::string& origin, std::size_t line_no,
                            const std::string& tok, const char* what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(tok, &pos);
    } catch (const std::exception&) {
        fail_line(origin, line_no, std::string("expected ") + what + ", got '" + tok + "'");
    }
    if (pos != tok.size()) {
        fail_line(origin, line_no, std::string("expected ") + what + ", got '" + tok + "'");
    }
    return static_cast<std::size_t>(v);
}

} // namespace

CodeBook parse_codes_text(const std::string& text, const std::string& origin) {
    CodeBook book;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&](std::vector<std::string>& toks) -> bool {
        while (std::getline(is, line)) {
            ++line_no;
            toks.clear();
            std::istringstream ls(line);
            std::string t;
            while (ls >> t) toks.push_back(t);
            if (!toks.empty()) return true;
        }
        return false;
    };

    std::vector<std::string> toks;
    if (!next_line(toks) || toks.size() != 2 || toks[0] != "hashcodes") {
        fail_line(origin, line_no == 0 ? 1 : line_no, "expected 'hashcodes 1' header");
    }
    if (toks[1] != "1") fail_line(origin, line_no, "unsupported code file version " + toks[1]);
    if (!next_line(toks) || toks.size() != 2 || toks[0] != "bits") {
        fail_line(origin, line_no, "expected 'bits K' header");
    }
    book.bits = parse_count_tok(origin, line_no, toks[1], "bit count");
    if (book.bits == 0) fail_line(origin, line_no, "bit count must be >= 1");
    if (!next_line(toks) || toks.size() != 2 || toks[0] != "count") {
        fail_line(origin, line_no, "expected 'count N' header");
    }
    const std::size_t count = parse_count_tok(origin, line_no, toks[1], "record count");

    bool have_record = next_line(toks);
    if (have_record && toks[0] == "labels") {
        book.label_names.assign(toks.begin() + 1, toks.end());
        if (book.label_names.empty()) fail_line(origin, line_no, "empty label vocabulary");
        have_record = next_line(toks);
    }

    book.codes.reserve(count);
    while (have_record) {
        if (toks.size() != 3) {
            fail_line(origin, line_no, "expected 'image_id label hex_code' record");
        }
        BinaryCode code;
        code.image_id = toks[0];
        code.label = parse_count_tok(origin, line_no, toks[1], "label index");
        try {
            code.bits = code_from_hex(toks[2], book.bits);
        } catch (const Error& e) {
            fail_line(origin, line_no, e.what());
        }
        book.codes.push_back(std::move(code));
        have_record = next_line(toks);
    }
    if (book.codes.size() != count) {
        throw Error(origin + ": header declares " + std::to_string(count) + " records, found " +
                    std::to_string(book.codes.size()));
    }
    validate(book);
    return book;
}

void save_codes_file(const CodeBook& book, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    const std::string text = codes_to_text(book);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write to '" + path + "' failed");
}

CodeBook load_codes_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open code file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_codes_text(buf.str(), path);
}

} // namespace hashnet
