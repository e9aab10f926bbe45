#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmedl {

enum class Modality : std::uint8_t { CBCT = 0, MRI = 1, PMRI = 2, PCBCT = 3 };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

/// Physical pixel spacing in millimetres.
struct Spacing {
    double row = 1.0;
    double col = 1.0;
    friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Row-major 2D grid.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}
    Grid(int rows, int cols, std::vector<T> data);

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

inline constexpr int kMinImageSide = 16;

/// Scalar intensity image with spacing and modality tag.
struct Image {
    Grid<float> pixels;
    Spacing spacing;
    Modality modality = Modality::CBCT;

    Image() = default;
    Image(Grid<float> px, Spacing sp, Modality m);

    int rows() const noexcept { return pixels.rows(); }
    int cols() const noexcept { return pixels.cols(); }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Binary mask aligned to an Image. Values are 0 or 1.
struct Mask {
    Grid<std::uint8_t> pixels;
    Spacing spacing;

    Mask() = default;
    Mask(Grid<std::uint8_t> px, Spacing sp);

    int rows() const noexcept { return pixels.rows(); }
    int cols() const noexcept { return pixels.cols(); }
    std::size_t count() const noexcept;
    friend bool operator==(const Mask&, const Mask&) = default;
};

/// Throws ShapeError unless the mask matches the image in shape and spacing.
void require_aligned(const Image& img, const Mask& mask);

/// Zero-mean / unit-variance standardization over the whole image. A constant
/// image maps to all zeros.
Image standardize(const Image& img);

/// Maps standardized intensities to the (-1, 1) domain shared with the
/// translation generators' tanh output: clamp(z / 3, -1, 1).
Image to_network_domain(const Image& standardized);

struct ImageStats {
    double mean = 0.0;
    double stddev = 0.0;
    float min = 0.0f;
    float max = 0.0f;
};
ImageStats image_stats(const Image& img);

}  // namespace cmedl
