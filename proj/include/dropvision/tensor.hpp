#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dropvision/error.hpp"
#include "dropvision/image.hpp"

namespace dropvision::nn {

// Dense float tensor, NCHW row-major.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    static Tensor zeros(int n, int c, int h, int w) {
        require(n >= 1 && c >= 1 && h >= 1 && w >= 1, "Tensor: bad dimensions");
        Tensor t;
        t.n = n;
        t.c = c;
        t.h = h;
        t.w = w;
        t.v.assign(static_cast<std::size_t>(n) * c * h * w, 0.f);
        return t;
    }

    std::size_t numel() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }

    float& at(int in, int ic, int iy, int ix) {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    float at(int in, int ic, int iy, int ix) const {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    float* sample(int in) { return v.data() + static_cast<std::size_t>(in) * sample_size(); }
    const float* sample(int in) const {
        return v.data() + static_cast<std::size_t>(in) * sample_size();
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

// Scales intensities into [0,1].
inline Tensor image_to_tensor_unit(const RasterImage& img) {
    Tensor t = Tensor::zeros(1, img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) t.at(0, c, y, x) = img.at(y, x, c) / 255.f;
    return t;
}

// Scales intensities into [-1,1].
inline Tensor image_to_tensor_signed(const RasterImage& img) {
    Tensor t = Tensor::zeros(1, img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at(0, c, y, x) = img.at(y, x, c) / 127.5f - 1.f;
    return t;
}

inline void copy_image_into_batch(Tensor& batch, int index, const Tensor& single) {
    require(single.n == 1 && single.sample_size() == batch.sample_size(),
            "copy_image_into_batch: shape mismatch");
    std::copy(single.v.begin(), single.v.end(), batch.sample(index));
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat_channels: shape mismatch");
    Tensor out = Tensor::zeros(a.n, a.c + b.c, a.h, a.w);
    for (int in = 0; in < a.n; ++in) {
        float* dst = out.sample(in);
        std::copy(a.sample(in), a.sample(in) + a.sample_size(), dst);
        std::copy(b.sample(in), b.sample(in) + b.sample_size(), dst + a.sample_size());
    }
    return out;
}

inline std::pair<Tensor, Tensor> split_channels(const Tensor& t, int c_first) {
    require(c_first >= 1 && c_first < t.c, "split_channels: bad channel split");
    Tensor a = Tensor::zeros(t.n, c_first, t.h, t.w);
    Tensor b = Tensor::zeros(t.n, t.c - c_first, t.h, t.w);
    for (int in = 0; in < t.n; ++in) {
        const float* src = t.sample(in);
        std::copy(src, src + a.sample_size(), a.sample(in));
        std::copy(src + a.sample_size(), src + t.sample_size(), b.sample(in));
    }
    return {std::move(a), std::move(b)};
}

} // namespace dropvision::nn
