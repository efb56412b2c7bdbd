#pragma once

#include "auprobe/network.hpp"

#include <filesystem>

namespace auprobe {

/// Inclusive input-pixel rectangle: columns x0..x1, rows y0..y1.
struct PixelRect {
    long x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    long width() const { return x1 - x0 + 1; }
    long height() const { return y1 - y0 + 1; }
    bool contains(long x, long y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Projects one activation back to input pixel space through the deconvnet.
///
/// `tap` is an activation index of the trace (0 is the input, i+1 is the output
/// of layer i). The tapped tensor is replaced by `value` at (map, row, col) and
/// zero elsewhere; then, walking down the layer stack, max pools unpool through
/// the trace's switches, ReLUs rectify the reconstructed signal, and
/// convolutions apply their transpose without bias. Only conv, ReLU, pool and
/// dropout layers may lie below the tap.
Tensor project_value(const ForwardTrace& trace, const Network& net, std::size_t tap, std::size_t map,
                     std::size_t row, std::size_t col, real value);
/// Same, seeded with the traced activation at that location.
Tensor project(const ForwardTrace& trace, const Network& net, std::size_t tap, std::size_t map, std::size_t row,
               std::size_t col);

struct MaxProjection {
    Tensor image;
    std::size_t row = 0, col = 0;
    real value = 0;
};

/// Spatial argmax of the map (ties to the smallest row-major index), projected.
MaxProjection project_max(const ForwardTrace& trace, const Network& net, std::size_t tap, std::size_t map);

/// Input rectangle that can influence the activation at (row, col) of `tap`.
/// With clip, every stage is clipped to its extent; without, the raw geometric
/// footprint is returned (may extend past the image).
PixelRect receptive_field(const Network& net, std::size_t tap, std::size_t row, std::size_t col, bool clip = true);

struct ResponseImages {
    std::filesystem::path original;
    std::filesystem::path deconvolution;
};

/// Writes `<stem>_orig.png` (the source crop at rf) and `<stem>_deconv.png` (the
/// projection cropped at rf, min-max normalized to 8 bits).
ResponseImages render_response(const Tensor& projection, const PixelRect& rf, const Tensor& source,
                               const std::filesystem::path& stem);

/// [H,W] crop of a [1,H,W] or [H,W] tensor.
Tensor crop_rect(const Tensor& image, const PixelRect& rect);

}  // namespace auprobe
