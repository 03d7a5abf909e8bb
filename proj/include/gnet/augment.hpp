#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "gnet/dataset.hpp"
#include "gnet/rng.hpp"

namespace gnet {

/// Per-clip augmentation parameters. Each op has an enable flag and draws
/// its magnitude once per clip.
struct AugmentPolicy {
    bool noise = true;
    double noise_sigma = 0.01;

    bool flip = true;
    double flip_probability = 0.5;

    bool rotate = true;
    double rotate_max_degrees = 15;

    bool crop = true;
    double crop_area_min = 0.8;
    double crop_area_max = 1.0;

    bool rescale = true;
    double rescale_min = 0.9;
    double rescale_max = 1.1;

    bool color = true;
    double brightness_min = -0.2;
    double brightness_max = 0.2;
    double hue_min = -0.05;
    double hue_max = 0.05;

    bool reverse = false;
    double reverse_probability = 0.5;

    bool shorten = true;
    double keep_min = 0.8;
    double keep_max = 1.0;

    /// Every op switched off.
    static AugmentPolicy none();
    /// Only the horizontal flip, always applied.
    static AugmentPolicy flip_only();

    void validate() const;
    nlohmann::json to_json() const;
    static AugmentPolicy from_json(const nlohmann::json& j);
};

/// What apply_policy actually drew. Disabled ops keep their neutral values.
struct AugmentDraw {
    std::size_t frames_in = 0;
    std::size_t shorten_start = 0;
    std::size_t shorten_frames = 0;
    bool reversed = false;
    bool flipped = false;
    double angle_degrees = 0;
    double crop_area = 1;
    double crop_y0 = 0;
    double crop_x0 = 0;
    double rescale_factor = 1;
    double brightness = 0;
    double hue = 0;
    double noise_sigma = 0;

    nlohmann::json to_json() const;
    friend bool operator==(const AugmentDraw&, const AugmentDraw&) = default;
};

struct AugmentedSample {
    VideoSample sample;
    AugmentDraw draw;

    /// Human-readable parameter dump (pretty JSON).
    std::string dump() const { return draw.to_json().dump(2) + "\n"; }
    friend bool operator==(const AugmentedSample&, const AugmentedSample&) = default;
};

enum class Interp { bilinear, nearest };

// Frame-level ops on [t, h, w, c] buffers. Geometry is in pixel-center
// coordinates; the rotation and rescale centers are ((h-1)/2, (w-1)/2).

FloatTensor add_gaussian_noise(const FloatTensor& frames, double sigma, RngStream& rng);
FloatTensor flip_horizontal(const FloatTensor& frames);
/// Positive angles turn content clockwise on screen; pixel (i, j) of a square
/// frame lands on (j, h-1-i) at 90 degrees.
FloatTensor rotate(const FloatTensor& frames, double degrees, Interp interp = Interp::bilinear);

/// Window [y0, y0+ch) x [x0, x0+cw) in pixels, possibly fractional.
struct CropWindow {
    double y0 = 0;
    double x0 = 0;
    double height = 0;
    double width = 0;
};

/// Square-root-of-area window with the frame's aspect ratio at a uniform
/// offset.
CropWindow draw_crop_window(std::size_t h, std::size_t w, double area, RngStream& rng);
/// Resamples the window to [out_h, out_w] with half-pixel centers, source
/// coordinates clamped to the frame.
FloatTensor crop_resize(const FloatTensor& frames, const CropWindow& window, std::size_t out_h, std::size_t out_w,
                        Interp interp = Interp::bilinear);
FloatTensor resize(const FloatTensor& frames, std::size_t out_h, std::size_t out_w,
                   Interp interp = Interp::bilinear);
/// Zoom about the center; sources outside the frame read as 0.
FloatTensor rescale(const FloatTensor& frames, double factor, Interp interp = Interp::bilinear);
/// Brightness shift with clamping, then a hue rotation in HSV space.
FloatTensor adjust_brightness_hue(const FloatTensor& frames, double brightness, double hue);

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

// Sample-level ops touching every modality consistently.

VideoSample reverse_time(const VideoSample& sample);
/// Keeps frames [start, start + count).
VideoSample shorten_clip(const VideoSample& sample, std::size_t start, std::size_t count);
/// count = max(1, round(keep * t)), start uniform over the valid windows.
VideoSample shorten_clip(const VideoSample& sample, double keep, RngStream& rng);

VideoSample flip_sample(const VideoSample& sample);
VideoSample rotate_sample(const VideoSample& sample, double degrees);
VideoSample crop_sample(const VideoSample& sample, const CropWindow& window);
VideoSample rescale_sample(const VideoSample& sample, double factor);

/// Temporal ops first (shorten, reverse), then flip, rotate, crop, rescale,
/// brightness/hue, noise. Every op draws from its own substream of `rng`.
AugmentedSample apply_policy(const VideoSample& sample, const AugmentPolicy& policy, const RngStream& rng);

}  // namespace gnet
