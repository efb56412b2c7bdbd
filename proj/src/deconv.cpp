#include "auprobe/deconv.hpp"

#include "auprobe/error.hpp"
#include "auprobe/image.hpp"

#include <algorithm>

namespace auprobe {

namespace {

void check_trace(const ForwardTrace& trace, const Network& net, std::size_t tap) {
    if (trace.activations.size() != net.layers().size() + 1)
        throw ShapeError("trace has " + std::to_string(trace.activations.size()) + " activations, network needs " +
                         std::to_string(net.layers().size() + 1));
    const auto shapes = net.activation_shapes();
    for (std::size_t i = 0; i < shapes.size(); ++i)
        if (trace.activations[i].shape() != shapes[i])
            throw ShapeError("trace activation " + std::to_string(i) + " does not match the network");
    if (tap == 0 || tap >= trace.activations.size()) throw ShapeError("tap index out of range");
    if (trace.activations[tap].rank() != 3) throw ShapeError("tap must be a [C,H,W] feature tensor");
}

}  // namespace

Tensor project_value(const ForwardTrace& trace, const Network& net, std::size_t tap, std::size_t map,
                     std::size_t row, std::size_t col, real value) {
    check_trace(trace, net, tap);
    const Tensor& act = trace.activations[tap];
    if (map >= act.dim(0) || row >= act.dim(1) || col >= act.dim(2))
        throw ShapeError("location (" + std::to_string(map) + "," + std::to_string(row) + "," + std::to_string(col) +
                         ") outside " + shape_string(act.shape()));
    Tensor signal(act.shape());
    signal(map, row, col) = value;
    for (std::size_t i = tap; i-- > 0;) {
        const auto& named = net.layers()[i];
        if (const auto* conv = std::get_if<ConvLayer>(&named.layer)) {
            signal = conv_transpose(signal, *conv, trace.activations[i].shape());
        } else if (std::holds_alternative<ReluLayer>(named.layer)) {
            signal = relu_forward(signal);
        } else if (std::holds_alternative<MaxPoolLayer>(named.layer)) {
            if (!trace.switches[i]) throw ShapeError("trace lacks switches for " + named.name);
            signal = maxpool_backward(signal, *trace.switches[i]);
        } else if (std::holds_alternative<FCLayer>(named.layer)) {
            throw ShapeError("cannot project through fully connected layer " + named.name);
        }
    }
    return signal;
}

Tensor project(const ForwardTrace& trace, const Network& net, std::size_t tap, std::size_t map, std::size_t row,
               std::size_t col) {
    check_trace(trace, net, tap);
    const Tensor& act = trace.activations[tap];
    if (map >= act.dim(0) || row >= act.dim(1) || col >= act.dim(2))
        throw ShapeError("location outside " + shape_string(act.shape()));
    return project_value(trace, net, tap, map, row, col, act(map, row, col));
}

MaxProjection project_max(const ForwardTrace& trace, const Network& net, std::size_t tap, std::size_t map) {
    check_trace(trace, net, tap);
    const Tensor& act = trace.activations[tap];
    if (map >= act.dim(0)) throw ShapeError("map index out of range");
    const std::size_t h = act.dim(1), w = act.dim(2);
    const real* plane = act.data() + map * h * w;
    const auto best = static_cast<std::size_t>(std::max_element(plane, plane + h * w) - plane);
    MaxProjection out;
    out.row = best / w;
    out.col = best % w;
    out.value = plane[best];
    out.image = project_value(trace, net, tap, map, out.row, out.col, out.value);
    return out;
}

PixelRect receptive_field(const Network& net, std::size_t tap, std::size_t row, std::size_t col, bool clip) {
    const auto shapes = net.activation_shapes();
    if (tap == 0 || tap >= shapes.size() || shapes[tap].size() != 3) throw ShapeError("invalid tap for receptive field");
    if (row >= shapes[tap][1] || col >= shapes[tap][2]) throw ShapeError("location outside the tapped map");
    long r0 = static_cast<long>(row), r1 = r0, c0 = static_cast<long>(col), c1 = c0;
    for (std::size_t i = tap; i-- > 0;) {
        const auto& layer = net.layers()[i].layer;
        if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
            const auto pad = static_cast<long>(conv->padding());
            const auto k = static_cast<long>(conv->kernel_size());
            r0 -= pad;
            c0 -= pad;
            r1 += k - 1 - pad;
            c1 += k - 1 - pad;
        } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
            r0 *= 2;
            c0 *= 2;
            r1 = 2 * r1 + 1;
            c1 = 2 * c1 + 1;
        } else if (std::holds_alternative<FCLayer>(layer)) {
            throw ShapeError("receptive field is undefined below a fully connected layer");
        }
        if (clip) {
            const auto h = static_cast<long>(shapes[i][1]), w = static_cast<long>(shapes[i][2]);
            r0 = std::max(r0, 0L);
            c0 = std::max(c0, 0L);
            r1 = std::min(r1, h - 1);
            c1 = std::min(c1, w - 1);
        }
    }
    return {c0, r0, c1, r1};
}

Tensor crop_rect(const Tensor& image, const PixelRect& rect) {
    std::size_t h = 0, w = 0;
    if (image.rank() == 2) {
        h = image.dim(0);
        w = image.dim(1);
    } else if (image.rank() == 3 && image.dim(0) == 1) {
        h = image.dim(1);
        w = image.dim(2);
    } else {
        throw ShapeError("crop_rect expects a single-channel image");
    }
    if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 >= static_cast<long>(w) || rect.y1 >= static_cast<long>(h) ||
        rect.x1 < rect.x0 || rect.y1 < rect.y0)
        throw ShapeError("crop rectangle outside image");
    Tensor out({static_cast<std::size_t>(rect.height()), static_cast<std::size_t>(rect.width())});
    for (long y = rect.y0; y <= rect.y1; ++y)
        for (long x = rect.x0; x <= rect.x1; ++x)
            out[static_cast<std::size_t>((y - rect.y0) * rect.width() + (x - rect.x0))] =
                image[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    return out;
}

ResponseImages render_response(const Tensor& projection, const PixelRect& rf, const Tensor& source,
                               const std::filesystem::path& stem) {
    ResponseImages out;
    out.original = stem.string() + "_orig.png";
    out.deconvolution = stem.string() + "_deconv.png";
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    write_png(normalize_to_gray(crop_rect(source, rf)), out.original);
    write_png(normalize_to_gray(crop_rect(projection, rf)), out.deconvolution);
    return out;
}

}  // namespace auprobe
