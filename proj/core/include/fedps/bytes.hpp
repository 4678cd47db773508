#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "fedps/errors.hpp"

namespace fedps {

/// Little-endian byte packing for summary and payload serialization.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void raw(const std::string& s) { buf_.append(s); }
    const std::string& bytes() const { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        std::uint64_t len = u64();
        need(len);
        std::string s = data_.substr(pos_, len);
        pos_ += len;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw ParseError("truncated payload");
    }
    const std::string& data_;
    std::size_t pos_ = 0;
};

inline std::string pack_doubles(const std::vector<double>& v) {
    ByteWriter w;
    for (double x : v) w.f64(x);
    return w.take();
}

inline std::vector<double> unpack_doubles(const std::string& s) {
    if (s.size() % 8 != 0) throw ParseError("double payload not a multiple of 8 bytes");
    ByteReader r(s);
    std::vector<double> out(s.size() / 8);
    for (auto& x : out) x = r.f64();
    return out;
}

}  // namespace fedps
