#include "asbu/rf.hpp"

#include <algorithm>
#include <sstream>

namespace asbu {

int effective_kernel(int k, int dilation) {
    if (k < 1 || dilation < 1) {
        throw ShapeError("effective_kernel: k and dilation must be >= 1");
    }
    return dilation * (k - 1) + 1;
}

RFTrace receptive_field(const std::vector<RFLayer>& layers) {
    if (layers.empty()) {
        throw ShapeError("receptive_field: empty layer list");
    }
    RFTrace trace;
    trace.rows.reserve(layers.size());
    std::int64_t stride_product = 1;  // product of strides of preceding layers
    std::int64_t rf = 1;
    for (const RFLayer& l : layers) {
        if (l.kernel < 1 || l.stride < 1 || l.dilation < 1) {
            throw ShapeError("receptive_field: bad layer '" + l.name + "'");
        }
        const int keff = effective_kernel(l.kernel, l.kind == RFKind::pool ? 1 : l.dilation);
        rf += static_cast<std::int64_t>(keff - 1) * stride_product;
        trace.rows.push_back({l.name, l.kind, keff, stride_product, rf, l.stage_end});
        stride_product *= l.stride;
    }
    return trace;
}

LinearityReport linearity_report(const RFTrace& trace, double near_linear_max_ratio) {
    if (trace.rows.size() < 3) {
        throw ShapeError("linearity_report: need a trace of at least 3 layers");
    }
    LinearityReport rep;
    rep.threshold = near_linear_max_ratio;

    double inc = 0.0;
    for (const RFRow& row : trace.rows) {
        // Growth contributed by this row, measured on its own feature grid.
        // Pool rows only rescale; they add no kernel context.
        if (row.kind != RFKind::pool) {
            inc += static_cast<double>(row.eff_kernel - 1);
        }
        if (row.stage_end) {
            rep.stage_rf.push_back(row.rf);
            rep.stage_increments.push_back(inc);
            inc = 0.0;
        }
    }

    for (std::size_t i = 0; i + 1 < rep.stage_increments.size(); ++i) {
        double a = rep.stage_increments[i];
        double b = rep.stage_increments[i + 1];
        if (a <= 0.0 || b <= 0.0) continue;
        rep.ratios.push_back(std::max(a / b, b / a));
    }
    rep.max_ratio = 1.0;
    for (double r : rep.ratios) rep.max_ratio = std::max(rep.max_ratio, r);
    rep.near_linear = rep.max_ratio <= rep.threshold;
    return rep;
}

std::string format_rf_table(const RFTrace& trace) {
    std::ostringstream os;
    os << "layer                 k_eff   S_l     r\n";
    for (const RFRow& row : trace.rows) {
        os << row.name;
        for (std::size_t i = row.name.size(); i < 22; ++i) os << ' ';
        std::string k = std::to_string(row.eff_kernel);
        std::string s = std::to_string(row.eff_stride);
        std::string r = std::to_string(row.rf);
        os << k;
        for (std::size_t i = k.size(); i < 8; ++i) os << ' ';
        os << s;
        for (std::size_t i = s.size(); i < 8; ++i) os << ' ';
        os << r << "\n";
    }
    return os.str();
}

std::string rf_growth_svg(const RFTrace& trace) {
    const int w = 640, h = 400, margin = 48;
    std::int64_t max_rf = 1;
    for (const RFRow& r : trace.rows) max_rf = std::max(max_rf, r.rf);
    const std::size_t n = trace.rows.size();

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
       << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << h - margin << "\" stroke=\"black\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
        double px = margin + (w - 2.0 * margin) * (n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
        double py = h - margin -
                    (h - 2.0 * margin) * static_cast<double>(trace.rows[i].rf) /
                        static_cast<double>(max_rf);
        os << px << "," << py << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << margin << "\" y=\"" << margin - 12
       << "\" font-size=\"13\">cumulative receptive field (max " << max_rf << ")</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace asbu
