#pragma once

#include <string>
#include <vector>

#include "advaug/datagen.hpp"
#include "advaug/heads.hpp"

namespace advaug {

struct GridSpec {
    double x_lo = -2.5;
    double x_hi = 3.5;
    double y_lo = -2.0;
    double y_hi = 2.5;
    std::size_t nx = 200;
    std::size_t ny = 200;

    void validate() const;
    double cell_x(std::size_t i) const; // cell-center coordinates
    double cell_y(std::size_t j) const;
};

// Model confidence sampled at the cell centers; [ny, nx], row 0 at y_lo.
Tensor confidence_grid(const Classifier& model, const GridSpec& grid);

// Filled confidence field, 0.5 decision contour (marching squares), and a
// data overlay. Deterministic text output.
std::string boundary_svg(const Tensor& field, const GridSpec& grid,
                         const std::vector<LabeledExample>& overlay);

void write_boundary_svg(const std::string& path, const Classifier& model, const GridSpec& grid,
                        const std::vector<LabeledExample>& overlay);

} // namespace advaug
