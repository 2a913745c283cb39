#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imputad/error.hpp"

namespace imputad {

// Dense row-major matrix. Time series use rows = variates, cols = timesteps;
// convolution kernels use rows = output channels, cols = input channels * k.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Tensor(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        require(data.size() == r * c, "shape_mismatch", "tensor data does not match its shape");
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const noexcept { return data.size(); }
    bool same_shape(const Tensor& other) const noexcept {
        return rows == other.rows && cols == other.cols;
    }

    // Columns [start, start + count).
    Tensor columns(std::size_t start, std::size_t count) const {
        require(start + count <= cols, "out_of_range", "column slice exceeds tensor");
        Tensor out(rows, count);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, start + c);
        return out;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace imputad
