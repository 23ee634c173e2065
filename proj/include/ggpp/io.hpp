#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ggpp/errors.hpp"

namespace ggpp::io {

// Little-endian binary writer/reader with a running FNV-1a checksum.
// File layout convention: magic, version, payload, trailing checksum.

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw FormatError("cannot open file for writing: " + path);
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= b[i];
            hash_ *= kFnvPrime;
        }
    }

    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    void f64_array(const std::vector<double>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(double));
    }

    // Writes the accumulated checksum; call last.
    void finish() {
        std::uint64_t h = hash_;
        out_.write(reinterpret_cast<const char*>(&h), sizeof h);
        if (!out_) throw FormatError("write failure");
    }

private:
    std::ofstream out_;
    std::uint64_t hash_ = kFnvOffset;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open file: " + path);
        in_.seekg(0, std::ios::end);
        size_ = static_cast<std::uint64_t>(in_.tellg());
        in_.seekg(0, std::ios::beg);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError("truncated file");
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= b[i];
            hash_ *= kFnvPrime;
        }
    }

    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, sizeof v);
        return v;
    }
    std::string str() {
        const std::uint64_t n = checked_len(1);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::vector<double> f64_array() {
        const std::uint64_t n = checked_len(sizeof(double));
        std::vector<double> v(n);
        bytes(v.data(), n * sizeof(double));
        return v;
    }

    // Validates the trailing checksum against everything read so far.
    void finish() {
        const std::uint64_t expected = hash_;
        std::uint64_t stored;
        in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
        if (static_cast<std::size_t>(in_.gcount()) != sizeof stored)
            throw FormatError("truncated file (missing checksum)");
        if (stored != expected)
            throw FormatError("checksum mismatch");
    }

    // Length prefix validated against the bytes actually left in the file,
    // so a corrupted length fails cleanly instead of allocating.
    std::uint64_t checked_len(std::uint64_t elem_size) {
        const std::uint64_t n = u64();
        const std::uint64_t left = size_ - static_cast<std::uint64_t>(in_.tellg());
        if (n > left / elem_size) throw FormatError("corrupt length field");
        return n;
    }

private:
    std::ifstream in_;
    std::uint64_t size_ = 0;
    std::uint64_t hash_ = kFnvOffset;
};

} // namespace ggpp::io
