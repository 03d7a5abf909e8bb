#include <cmath>
#include <numbers>

#include "gnet/augment.hpp"
#include "gnet/json_util.hpp"

namespace gnet {

namespace {

// Substream ids, one per op.
enum : std::uint64_t { kShorten = 1, kReverse, kFlip, kRotate, kCrop, kRescale, kColor, kNoise };

constexpr double kSnap = 1e-9;

double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < kSnap ? r : v;
}

void check_frames(const FloatTensor& frames, const char* op) {
    if (frames.rank() != 4) {
        throw ShapeError(std::string(op) + ": frames must be [t, h, w, c], got " + shape_str(frames.shape()));
    }
}

// Source coordinate of one output pixel; `valid` false reads as 0.
struct Source {
    double y = 0;
    double x = 0;
    bool valid = true;
};

// Resamples every frame through the same per-pixel source table.
FloatTensor resample(const FloatTensor& frames, std::size_t out_h, std::size_t out_w,
                     const std::vector<Source>& table, Interp interp) {
    const std::size_t t = frames.dim(0), h = frames.dim(1), w = frames.dim(2), ch = frames.dim(3);
    FloatTensor out({t, out_h, out_w, ch});
    const float* in = frames.ptr();
    float* dst = out.ptr();
    for (std::size_t f = 0; f < t; ++f) {
        const float* frame = in + f * h * w * ch;
        float* oframe = dst + f * out_h * out_w * ch;
        for (std::size_t p = 0; p < out_h * out_w; ++p) {
            const Source& s = table[p];
            float* o = oframe + p * ch;
            if (!s.valid) continue;
            if (interp == Interp::nearest) {
                const auto i = std::size_t(std::clamp(std::floor(s.y + 0.5), 0.0, double(h - 1)));
                const auto j = std::size_t(std::clamp(std::floor(s.x + 0.5), 0.0, double(w - 1)));
                for (std::size_t c = 0; c < ch; ++c) o[c] = frame[(i * w + j) * ch + c];
                continue;
            }
            const auto i0 = std::size_t(std::floor(s.y)), j0 = std::size_t(std::floor(s.x));
            const std::size_t i1 = std::min(i0 + 1, h - 1), j1 = std::min(j0 + 1, w - 1);
            const double fy = s.y - double(i0), fx = s.x - double(j0);
            for (std::size_t c = 0; c < ch; ++c) {
                const double v00 = frame[(i0 * w + j0) * ch + c], v01 = frame[(i0 * w + j1) * ch + c];
                const double v10 = frame[(i1 * w + j0) * ch + c], v11 = frame[(i1 * w + j1) * ch + c];
                double v;
                if (fy == 0 && fx == 0) {
                    v = v00;
                } else {
                    v = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
                }
                o[c] = float(v);
            }
        }
    }
    return out;
}

// Marks sources outside the pixel-center hull of the frame as fill.
void bound(Source& s, std::size_t h, std::size_t w) {
    const double y = snap(s.y), x = snap(s.x);
    s.valid = y >= 0 && y <= double(h - 1) && x >= 0 && x <= double(w - 1);
    s.y = std::clamp(y, 0.0, double(h - 1));
    s.x = std::clamp(x, 0.0, double(w - 1));
}

void check_range(const char* key, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError(std::string("augment.") + key, "range bounds out of order");
}

void check_probability(const char* key, double p) {
    if (!(p >= 0 && p <= 1)) throw ConfigError(std::string("augment.") + key, "probability must lie in [0, 1]");
}

// Applies f to the skeleton's normalized (x, y) coordinates.
template <typename F>
void map_skeleton(FloatTensor& skeleton, F f) {
    for (std::size_t k = 0; k + 2 < skeleton.numel(); k += 3) {
        double x = skeleton[k], y = skeleton[k + 1];
        f(x, y);
        skeleton[k] = float(x);
        skeleton[k + 1] = float(y);
    }
}

}  // namespace

// ---------------------------------------------------------------------------

AugmentPolicy AugmentPolicy::none() {
    AugmentPolicy p;
    p.noise = p.flip = p.rotate = p.crop = p.rescale = p.color = p.reverse = p.shorten = false;
    return p;
}

AugmentPolicy AugmentPolicy::flip_only() {
    AugmentPolicy p = none();
    p.flip = true;
    p.flip_probability = 1.0;
    return p;
}

void AugmentPolicy::validate() const {
    if (!(noise_sigma >= 0)) throw ConfigError("augment.noise.sigma", "must be non-negative");
    check_probability("flip.probability", flip_probability);
    if (!(rotate_max_degrees >= 0 && rotate_max_degrees <= 180)) {
        throw ConfigError("augment.rotate.max_degrees", "must lie in [0, 180]");
    }
    check_range("crop.area", crop_area_min, crop_area_max);
    if (!(crop_area_min > 0 && crop_area_max <= 1)) throw ConfigError("augment.crop.area", "must lie in (0, 1]");
    check_range("rescale.factor", rescale_min, rescale_max);
    if (!(rescale_min > 0)) throw ConfigError("augment.rescale.factor", "must be positive");
    check_range("color.brightness", brightness_min, brightness_max);
    check_range("color.hue", hue_min, hue_max);
    check_probability("reverse.probability", reverse_probability);
    check_range("shorten.keep", keep_min, keep_max);
    if (!(keep_min > 0 && keep_max <= 1)) throw ConfigError("augment.shorten.keep", "must lie in (0, 1]");
}

nlohmann::json AugmentPolicy::to_json() const {
    return {
        {"noise", {{"enabled", noise}, {"sigma", noise_sigma}}},
        {"flip", {{"enabled", flip}, {"probability", flip_probability}}},
        {"rotate", {{"enabled", rotate}, {"max_degrees", rotate_max_degrees}}},
        {"crop", {{"enabled", crop}, {"area", {crop_area_min, crop_area_max}}}},
        {"rescale", {{"enabled", rescale}, {"factor", {rescale_min, rescale_max}}}},
        {"color",
         {{"enabled", color}, {"brightness", {brightness_min, brightness_max}}, {"hue", {hue_min, hue_max}}}},
        {"reverse", {{"enabled", reverse}, {"probability", reverse_probability}}},
        {"shorten", {{"enabled", shorten}, {"keep", {keep_min, keep_max}}}},
    };
}

namespace {

void read_range(JsonReader& r, const std::string& key, double& lo, double& hi) {
    std::array<double, 2> pair{lo, hi};
    r.read(key, pair);
    lo = pair[0];
    hi = pair[1];
}

template <typename F>
void read_op(JsonReader& root, const std::string& key, bool& enabled, F fields) {
    if (!root.has(key)) return;
    JsonReader r(root.at(key), root.path(key));
    r.read("enabled", enabled);
    fields(r);
    r.finish();
}

}  // namespace

AugmentPolicy AugmentPolicy::from_json(const nlohmann::json& j) {
    AugmentPolicy p;
    JsonReader r(j, "augment");
    read_op(r, "noise", p.noise, [&](JsonReader& o) { o.read("sigma", p.noise_sigma); });
    read_op(r, "flip", p.flip, [&](JsonReader& o) { o.read("probability", p.flip_probability); });
    read_op(r, "rotate", p.rotate, [&](JsonReader& o) { o.read("max_degrees", p.rotate_max_degrees); });
    read_op(r, "crop", p.crop, [&](JsonReader& o) { read_range(o, "area", p.crop_area_min, p.crop_area_max); });
    read_op(r, "rescale", p.rescale,
            [&](JsonReader& o) { read_range(o, "factor", p.rescale_min, p.rescale_max); });
    read_op(r, "color", p.color, [&](JsonReader& o) {
        read_range(o, "brightness", p.brightness_min, p.brightness_max);
        read_range(o, "hue", p.hue_min, p.hue_max);
    });
    read_op(r, "reverse", p.reverse, [&](JsonReader& o) { o.read("probability", p.reverse_probability); });
    read_op(r, "shorten", p.shorten, [&](JsonReader& o) { read_range(o, "keep", p.keep_min, p.keep_max); });
    r.finish();
    p.validate();
    return p;
}

nlohmann::json AugmentDraw::to_json() const {
    return {{"frames_in", frames_in},
            {"shorten_start", shorten_start},
            {"shorten_frames", shorten_frames},
            {"reversed", reversed},
            {"flipped", flipped},
            {"angle_degrees", angle_degrees},
            {"crop_area", crop_area},
            {"crop_y0", crop_y0},
            {"crop_x0", crop_x0},
            {"rescale_factor", rescale_factor},
            {"brightness", brightness},
            {"hue", hue},
            {"noise_sigma", noise_sigma}};
}

// ---------------------------------------------------------------------------
// Frame ops.

FloatTensor add_gaussian_noise(const FloatTensor& frames, double sigma, RngStream& rng) {
    if (!(sigma >= 0)) throw ValueError("add_gaussian_noise: sigma must be non-negative");
    if (sigma == 0) return frames;
    FloatTensor out = frames;
    for (float& v : out.storage()) v = float(std::clamp(double(v) + sigma * rng.normal(), 0.0, 1.0));
    return out;
}

FloatTensor flip_horizontal(const FloatTensor& frames) {
    check_frames(frames, "flip_horizontal");
    const std::size_t rows = frames.dim(0) * frames.dim(1), w = frames.dim(2), ch = frames.dim(3);
    FloatTensor out(frames.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < w; ++j) {
            const float* src = frames.ptr() + (r * w + j) * ch;
            std::copy(src, src + ch, out.ptr() + (r * w + (w - 1 - j)) * ch);
        }
    }
    return out;
}

FloatTensor rotate(const FloatTensor& frames, double degrees, Interp interp) {
    check_frames(frames, "rotate");
    if (degrees == 0) return frames;
    const std::size_t h = frames.dim(1), w = frames.dim(2);
    const double rad = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cy = double(h - 1) / 2, cx = double(w - 1) / 2;
    std::vector<Source> table(h * w);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const double dy = double(i) - cy, dx = double(j) - cx;
            Source& src = table[i * w + j];
            src.y = cy + c * dy - s * dx;
            src.x = cx + s * dy + c * dx;
            bound(src, h, w);
        }
    }
    return resample(frames, h, w, table, interp);
}

CropWindow draw_crop_window(std::size_t h, std::size_t w, double area, RngStream& rng) {
    if (!(area > 0 && area <= 1)) throw ValueError("draw_crop_window: area fraction must lie in (0, 1]");
    const double side = std::sqrt(area);
    CropWindow win;
    win.height = side * double(h);
    win.width = side * double(w);
    win.y0 = rng.uniform(0.0, double(h) - win.height);
    win.x0 = rng.uniform(0.0, double(w) - win.width);
    return win;
}

FloatTensor crop_resize(const FloatTensor& frames, const CropWindow& win, std::size_t out_h, std::size_t out_w,
                        Interp interp) {
    check_frames(frames, "crop_resize");
    if (out_h == 0 || out_w == 0 || !(win.height > 0) || !(win.width > 0)) {
        throw ValueError("crop_resize: empty window or output");
    }
    const std::size_t h = frames.dim(1), w = frames.dim(2);
    std::vector<Source> table(out_h * out_w);
    for (std::size_t i = 0; i < out_h; ++i) {
        const double y = snap(win.y0 + (double(i) + 0.5) * win.height / double(out_h) - 0.5);
        for (std::size_t j = 0; j < out_w; ++j) {
            const double x = snap(win.x0 + (double(j) + 0.5) * win.width / double(out_w) - 0.5);
            table[i * out_w + j] = {std::clamp(y, 0.0, double(h - 1)), std::clamp(x, 0.0, double(w - 1)), true};
        }
    }
    return resample(frames, out_h, out_w, table, interp);
}

FloatTensor resize(const FloatTensor& frames, std::size_t out_h, std::size_t out_w, Interp interp) {
    check_frames(frames, "resize");
    return crop_resize(frames, {0, 0, double(frames.dim(1)), double(frames.dim(2))}, out_h, out_w, interp);
}

FloatTensor rescale(const FloatTensor& frames, double factor, Interp interp) {
    check_frames(frames, "rescale");
    if (!(factor > 0)) throw ValueError("rescale: factor must be positive");
    if (factor == 1) return frames;
    const std::size_t h = frames.dim(1), w = frames.dim(2);
    const double cy = double(h - 1) / 2, cx = double(w - 1) / 2;
    std::vector<Source> table(h * w);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            Source& src = table[i * w + j];
            src.y = cy + (double(i) - cy) / factor;
            src.x = cx + (double(j) - cx) / factor;
            bound(src, h, w);
        }
    }
    return resample(frames, h, w, table, interp);
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx > 0 ? d / mx : 0;
    if (d == 0) {
        h = 0;
        return;
    }
    if (mx == r) {
        h = (g - b) / d;
        if (h < 0) h += 6;
    } else if (mx == g) {
        h = (b - r) / d + 2;
    } else {
        h = (r - g) / d + 4;
    }
    h /= 6;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double hh = (h - std::floor(h)) * 6;
    const auto sector = std::min(5, int(hh));
    const double f = hh - sector;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
}

FloatTensor adjust_brightness_hue(const FloatTensor& frames, double brightness, double hue) {
    check_frames(frames, "adjust_brightness_hue");
    if (frames.dim(3) != 3) throw ShapeError("adjust_brightness_hue: needs 3-channel frames");
    FloatTensor out = frames;
    if (brightness != 0) {
        for (float& v : out.storage()) v = float(std::clamp(double(v) + brightness, 0.0, 1.0));
    }
    if (hue != 0) {
        for (std::size_t p = 0; p < out.numel(); p += 3) {
            double h, s, v, r, g, b;
            rgb_to_hsv(out[p], out[p + 1], out[p + 2], h, s, v);
            hsv_to_rgb(h + hue, s, v, r, g, b);
            out[p] = float(std::clamp(r, 0.0, 1.0));
            out[p + 1] = float(std::clamp(g, 0.0, 1.0));
            out[p + 2] = float(std::clamp(b, 0.0, 1.0));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sample ops.

namespace {

FloatTensor frame_range(const FloatTensor& x, std::size_t start, std::size_t count, bool reversed) {
    Shape shape = x.shape();
    const std::size_t per = x.numel() / shape[0];
    shape[0] = count;
    FloatTensor out(shape);
    for (std::size_t f = 0; f < count; ++f) {
        const std::size_t src = reversed ? start + count - 1 - f : start + f;
        std::copy(x.ptr() + src * per, x.ptr() + (src + 1) * per, out.ptr() + f * per);
    }
    return out;
}

VideoSample frames_of(const VideoSample& s, std::size_t start, std::size_t count, bool reversed) {
    VideoSample out;
    out.label = s.label;
    out.num_frames = std::uint32_t(count);
    out.rgb = frame_range(s.rgb, start, count, reversed);
    out.depth = frame_range(s.depth, start, count, reversed);
    out.segmentation = frame_range(s.segmentation, start, count, reversed);
    out.skeleton = frame_range(s.skeleton, start, count, reversed);
    return out;
}

}  // namespace

VideoSample reverse_time(const VideoSample& s) { return frames_of(s, 0, s.num_frames, true); }

VideoSample shorten_clip(const VideoSample& s, std::size_t start, std::size_t count) {
    if (count == 0 || start + count > s.num_frames) {
        throw ValueError("shorten_clip: window [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside a clip of " + std::to_string(s.num_frames) + " frames");
    }
    return frames_of(s, start, count, false);
}

namespace {

std::size_t kept_frames(std::size_t t, double keep) {
    const auto n = std::size_t(std::llround(std::clamp(keep, 0.0, 1.0) * double(t)));
    return std::clamp<std::size_t>(n, 1, t);
}

}  // namespace

VideoSample shorten_clip(const VideoSample& s, double keep, RngStream& rng) {
    const std::size_t count = kept_frames(s.num_frames, keep);
    return shorten_clip(s, rng.uniform_index(s.num_frames - count + 1), count);
}

VideoSample flip_sample(const VideoSample& s) {
    VideoSample out = s;
    out.rgb = flip_horizontal(s.rgb);
    out.depth = flip_horizontal(s.depth);
    out.segmentation = flip_horizontal(s.segmentation);
    map_skeleton(out.skeleton, [](double& x, double&) { x = 1 - x; });
    return out;
}

VideoSample rotate_sample(const VideoSample& s, double degrees) {
    if (degrees == 0) return s;
    VideoSample out = s;
    out.rgb = rotate(s.rgb, degrees);
    out.depth = rotate(s.depth, degrees);
    out.segmentation = rotate(s.segmentation, degrees, Interp::nearest);
    const double h = double(s.height()), w = double(s.width());
    const double rad = degrees * std::numbers::pi / 180.0, c = std::cos(rad), sn = std::sin(rad);
    const double cy = (h - 1) / 2, cx = (w - 1) / 2;
    map_skeleton(out.skeleton, [&](double& x, double& y) {
        // inverse of the resampling map: output offset = R^T (source offset)
        const double dy = y * h - 0.5 - cy, dx = x * w - 0.5 - cx;
        const double oy = c * dy + sn * dx, ox = -sn * dy + c * dx;
        y = (cy + oy + 0.5) / h;
        x = (cx + ox + 0.5) / w;
    });
    return out;
}

VideoSample crop_sample(const VideoSample& s, const CropWindow& win) {
    const std::size_t h = s.height(), w = s.width();
    if (win.y0 == 0 && win.x0 == 0 && win.height == double(h) && win.width == double(w)) return s;
    VideoSample out = s;
    out.rgb = crop_resize(s.rgb, win, h, w);
    out.depth = crop_resize(s.depth, win, h, w);
    out.segmentation = crop_resize(s.segmentation, win, h, w, Interp::nearest);
    map_skeleton(out.skeleton, [&](double& x, double& y) {
        y = (y * double(h) - win.y0) / win.height;
        x = (x * double(w) - win.x0) / win.width;
    });
    return out;
}

VideoSample rescale_sample(const VideoSample& s, double factor) {
    if (factor == 1) return s;
    VideoSample out = s;
    out.rgb = rescale(s.rgb, factor);
    out.depth = rescale(s.depth, factor);
    out.segmentation = rescale(s.segmentation, factor, Interp::nearest);
    map_skeleton(out.skeleton, [&](double& x, double& y) {
        y = 0.5 + factor * (y - 0.5);
        x = 0.5 + factor * (x - 0.5);
    });
    return out;
}

AugmentedSample apply_policy(const VideoSample& sample, const AugmentPolicy& policy, const RngStream& rng) {
    policy.validate();
    AugmentedSample out{sample, {}};
    AugmentDraw& d = out.draw;
    VideoSample& s = out.sample;
    d.frames_in = sample.num_frames;
    d.shorten_frames = sample.num_frames;

    if (policy.shorten) {
        RngStream r = rng.derive(kShorten);
        const double keep = r.uniform(policy.keep_min, policy.keep_max);
        d.shorten_frames = kept_frames(s.num_frames, keep);
        d.shorten_start = r.uniform_index(s.num_frames - d.shorten_frames + 1);
        if (d.shorten_frames != s.num_frames) s = shorten_clip(s, d.shorten_start, d.shorten_frames);
    }
    if (policy.reverse) {
        RngStream r = rng.derive(kReverse);
        d.reversed = r.bernoulli(policy.reverse_probability);
        if (d.reversed) s = reverse_time(s);
    }
    if (policy.flip) {
        RngStream r = rng.derive(kFlip);
        d.flipped = r.bernoulli(policy.flip_probability);
        if (d.flipped) s = flip_sample(s);
    }
    if (policy.rotate) {
        RngStream r = rng.derive(kRotate);
        d.angle_degrees = r.uniform(-policy.rotate_max_degrees, policy.rotate_max_degrees);
        s = rotate_sample(s, d.angle_degrees);
    }
    if (policy.crop) {
        RngStream r = rng.derive(kCrop);
        d.crop_area = r.uniform(policy.crop_area_min, policy.crop_area_max);
        const CropWindow win = draw_crop_window(s.height(), s.width(), d.crop_area, r);
        d.crop_y0 = win.y0;
        d.crop_x0 = win.x0;
        s = crop_sample(s, win);
    }
    if (policy.rescale) {
        RngStream r = rng.derive(kRescale);
        d.rescale_factor = r.uniform(policy.rescale_min, policy.rescale_max);
        s = rescale_sample(s, d.rescale_factor);
    }
    if (policy.color) {
        RngStream r = rng.derive(kColor);
        d.brightness = r.uniform(policy.brightness_min, policy.brightness_max);
        d.hue = r.uniform(policy.hue_min, policy.hue_max);
        s.rgb = adjust_brightness_hue(s.rgb, d.brightness, d.hue);
    }
    if (policy.noise) {
        RngStream r = rng.derive(kNoise);
        d.noise_sigma = policy.noise_sigma;
        s.rgb = add_gaussian_noise(s.rgb, d.noise_sigma, r);
        s.depth = add_gaussian_noise(s.depth, d.noise_sigma, r);
    }
    return out;
}

}  // namespace gnet
