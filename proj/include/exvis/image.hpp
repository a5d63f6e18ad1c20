// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace exvis {

struct Rgb {
    std::uint8_t r{0};
    std::uint8_t g{0};
    std::uint8_t b{0};

    bool operator==(const Rgb&) const = default;
};

/// Dense row-major grid of 8-bit RGB pixels.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    Rgb at(int x, int y) const noexcept {
        const auto i = index(x, y);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int x, int y, Rgb c) noexcept {
        const auto i = index(x, y);
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }
    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    std::span<const std::uint8_t> bytes() const noexcept { return data_; }
    std::span<std::uint8_t> bytes() noexcept { return data_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) * 3;
    }

    int width_{0};
    int height_{0};
    std::vector<std::uint8_t> data_;
};

/// ITU-R BT.601 luma, unrounded.
inline double luminance(Rgb c) noexcept {
    return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
}

inline bool same_size(const Image& a, const Image& b) noexcept {
    return a.width() == b.width() && a.height() == b.height();
}

/// Rounds half away from zero and clamps to [0, 255].
std::uint8_t clamp_round_u8(double v) noexcept;

void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace exvis
