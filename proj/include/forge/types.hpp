#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace forge {

/// N x 3 array of points (vertices, joints, offsets, per-vertex gradients).
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
/// F x 3 triangle vertex indices, counter-clockwise.
using Faces = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;
/// N x 2 per-vertex texture coordinates.
using UVs = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Matrix3d;

/// Row-major RGB image of doubles. Used for renders, albedo maps, noise and
/// pixel gradients alike.
struct Image {
    static constexpr int kChannels = 3;

    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * kChannels, fill) {}

    bool empty() const { return data.empty(); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

    double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }

    Vector3d pixel(int x, int y) const {
        const double* p = &data[(static_cast<std::size_t>(y) * width + x) * kChannels];
        return {p[0], p[1], p[2]};
    }
    void set_pixel(int x, int y, const Vector3d& v) {
        double* p = &data[(static_cast<std::size_t>(y) * width + x) * kChannels];
        p[0] = v.x();
        p[1] = v.y();
        p[2] = v.z();
    }

    bool operator==(const Image&) const = default;
};

// Error categories. Each maps to a distinct CLI exit code.

/// Malformed input file; message carries file/line/field context.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed data that violates a documented invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Run configuration problems. Lists every offending key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Guidance oracle failure (timeout, protocol, server-side error). Retriable.
class GuidanceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training could not complete (too many skipped iterations, etc.).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace forge
