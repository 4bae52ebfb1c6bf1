#pragma once

#include "cfood/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>

namespace cfood::detail {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    } else {
        return v;
    }
}

class Writer {
public:
    explicit Writer(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc)
    {
        if (!out_)
            throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }

    void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

    template <typename T>
    void scalar(T v)
    {
        v = to_little(v);
        bytes(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    template <typename T>
    void array(const T* data, std::size_t n)
    {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(reinterpret_cast<const char*>(data), n * sizeof(T));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                scalar(data[i]);
        }
    }

    void seek(std::uint64_t pos) { out_.seekp(static_cast<std::streamoff>(pos)); }

    void finish()
    {
        out_.flush();
        if (!out_)
            throw Error(ErrorKind::Io, "write failed for " + path_.string());
    }

private:
    fs::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const fs::path& path) : path_(path), in_(path, std::ios::binary)
    {
        if (!in_)
            throw Error(ErrorKind::Io, "cannot open " + path.string());
        std::error_code ec;
        size_ = fs::file_size(path, ec);
        if (ec)
            throw Error(ErrorKind::Io, "cannot stat " + path.string());
    }

    std::uint64_t size() const { return size_; }
    const fs::path& path() const { return path_; }

    void bytes(char* data, std::size_t n)
    {
        in_.read(data, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw Error(ErrorKind::Truncated, "truncated file: " + path_.string());
    }

    template <typename T>
    T scalar()
    {
        T v;
        bytes(reinterpret_cast<char*>(&v), sizeof(T));
        return to_little(v);
    }

    template <typename T>
    void array(T* data, std::size_t n)
    {
        bytes(reinterpret_cast<char*>(data), n * sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < n; ++i)
                data[i] = to_little(data[i]);
    }

private:
    fs::path path_;
    std::ifstream in_;
    std::uint64_t size_ = 0;
};

} // namespace cfood::detail
