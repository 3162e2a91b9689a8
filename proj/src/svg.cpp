#include "advaug/svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "advaug/errors.hpp"

namespace advaug {

void GridSpec::validate() const {
    if (!(x_hi > x_lo) || !(y_hi > y_lo)) throw ConfigError("grid: empty extent");
    if (nx < 2 || ny < 2) throw ConfigError("grid: need at least 2x2 cells");
}

double GridSpec::cell_x(std::size_t i) const {
    return x_lo + (x_hi - x_lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(nx);
}

double GridSpec::cell_y(std::size_t j) const {
    return y_lo + (y_hi - y_lo) * (static_cast<double>(j) + 0.5) / static_cast<double>(ny);
}

Tensor confidence_grid(const Classifier& model, const GridSpec& grid) {
    grid.validate();
    if (model.input_dim() != 2) {
        throw ConfigError("boundary plots need a 2-D input model, this one expects " +
                          std::to_string(model.input_dim()) + " features");
    }
    std::vector<double> rows;
    rows.reserve(grid.nx * grid.ny * 2);
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            rows.push_back(grid.cell_x(i));
            rows.push_back(grid.cell_y(j));
        }
    }
    Tensor batch = Tensor::from({grid.nx * grid.ny, 2}, std::move(rows));
    std::vector<double> conf = model.confidences(batch);
    return Tensor::from({grid.ny, grid.nx}, std::move(conf));
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

// blue (negative) -> white -> red (positive)
std::string field_color(double c) {
    double t = std::clamp(c, 0.0, 1.0);
    int r, g, b;
    if (t < 0.5) {
        double u = t / 0.5;
        r = static_cast<int>(70 + u * (255 - 70));
        g = static_cast<int>(110 + u * (255 - 110));
        b = 255;
    } else {
        double u = (t - 0.5) / 0.5;
        r = 255;
        g = static_cast<int>(255 - u * (255 - 90));
        b = static_cast<int>(255 - u * (255 - 80));
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

std::string boundary_svg(const Tensor& field, const GridSpec& grid,
                         const std::vector<LabeledExample>& overlay) {
    grid.validate();
    if (field.rank() != 2 || field.rows() != grid.ny || field.cols() != grid.nx) {
        throw std::invalid_argument("boundary_svg: field shape " + format_shape(field.shape()) +
                                    " does not match the grid");
    }
    const double width = 640.0, height = 560.0, margin = 20.0;
    const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    auto sx = [&](double x) { return margin + (x - grid.x_lo) / (grid.x_hi - grid.x_lo) * plot_w; };
    auto sy = [&](double y) { return height - margin - (y - grid.y_lo) / (grid.y_hi - grid.y_lo) * plot_h; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";

    double cw = plot_w / static_cast<double>(grid.nx);
    double ch = plot_h / static_cast<double>(grid.ny);
    svg << "<g shape-rendering=\"crispEdges\">\n";
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            double px = margin + static_cast<double>(i) * cw;
            double py = height - margin - static_cast<double>(j + 1) * ch;
            svg << "<rect x=\"" << fmt(px) << "\" y=\"" << fmt(py) << "\" width=\"" << fmt(cw + 0.05)
                << "\" height=\"" << fmt(ch + 0.05) << "\" fill=\"" << field_color(field.at(j, i))
                << "\"/>\n";
        }
    }
    svg << "</g>\n";

    // 0.5 contour by marching squares over cell centers
    svg << "<g stroke=\"#222222\" stroke-width=\"1.2\" fill=\"none\">\n";
    const double iso = 0.5;
    auto interp = [&](double a, double b) { return (iso - a) / (b - a); };
    for (std::size_t j = 0; j + 1 < grid.ny; ++j) {
        for (std::size_t i = 0; i + 1 < grid.nx; ++i) {
            double v00 = field.at(j, i), v10 = field.at(j, i + 1);
            double v01 = field.at(j + 1, i), v11 = field.at(j + 1, i + 1);
            double x0 = grid.cell_x(i), x1 = grid.cell_x(i + 1);
            double y0 = grid.cell_y(j), y1 = grid.cell_y(j + 1);
            struct Pt {
                double x, y;
            };
            std::vector<Pt> hits;
            if ((v00 < iso) != (v10 < iso)) hits.push_back({x0 + (x1 - x0) * interp(v00, v10), y0});
            if ((v01 < iso) != (v11 < iso)) hits.push_back({x0 + (x1 - x0) * interp(v01, v11), y1});
            if ((v00 < iso) != (v01 < iso)) hits.push_back({x0, y0 + (y1 - y0) * interp(v00, v01)});
            if ((v10 < iso) != (v11 < iso)) hits.push_back({x1, y0 + (y1 - y0) * interp(v10, v11)});
            if (hits.size() >= 2) {
                for (std::size_t k = 0; k + 1 < hits.size(); k += 2) {
                    svg << "<line x1=\"" << fmt(sx(hits[k].x)) << "\" y1=\"" << fmt(sy(hits[k].y))
                        << "\" x2=\"" << fmt(sx(hits[k + 1].x)) << "\" y2=\"" << fmt(sy(hits[k + 1].y))
                        << "\"/>\n";
                }
            }
        }
    }
    svg << "</g>\n";

    svg << "<g stroke=\"#ffffff\" stroke-width=\"0.4\">\n";
    for (const auto& e : overlay) {
        if (e.x.size() != 2) throw std::invalid_argument("boundary_svg: overlay points must be 2-D");
        const char* fill = e.label == 1 ? "#a00000" : "#003080";
        double r = 2.2;
        switch (e.source) {
            case Source::synthetic_random:
            case Source::synthetic_pgd: fill = e.source == Source::synthetic_pgd ? "#ff7700" : "#00a050"; break;
            case Source::noise: fill = "#555555"; break;
            case Source::perturbed: fill = "#aa00aa"; break;
            default: break;
        }
        svg << "<circle cx=\"" << fmt(sx(e.x[0])) << "\" cy=\"" << fmt(sy(e.x[1])) << "\" r=\"" << r
            << "\" fill=\"" << fill << "\"/>\n";
    }
    svg << "</g>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_boundary_svg(const std::string& path, const Classifier& model, const GridSpec& grid,
                        const std::vector<LabeledExample>& overlay) {
    Tensor field = confidence_grid(model, grid);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << boundary_svg(field, grid, overlay);
    if (!out.good()) throw IoError("write failed: " + path);
}

} // namespace advaug
