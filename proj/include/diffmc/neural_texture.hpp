#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "diffmc/mesh.hpp"

namespace dmc {

/// Vector-matrix factorised feature volume. Component c of the 3C raw
/// features at normalised point q is
///   M_xy[c](qx, qy) * v_z[c](qz)   for c in [0, C),
///   M_yz[c](qy, qz) * v_x[c](qx)   for c in [C, 2C),
///   M_zx[c](qz, qx) * v_y[c](qy)   for c in [2C, 3C),
/// and the output features are basis * raw. Samples are taken with aligned
/// corners: normalised coordinate 0 maps to texel 0 and 1 to texel R - 1.
struct VmTexture {
    int channels = 0;    ///< C
    int resolution = 0;  ///< R
    int features = 0;    ///< F
    /// M_xy, M_yz, M_zx, each C x R x R; entry (c, i, j) at (c * R + i) * R + j,
    /// where i indexes the first coordinate of the pair.
    std::array<std::vector<double>, 3> planes;
    /// v_z, v_x, v_y, each C x R; entry (c, i) at c * R + i.
    std::array<std::vector<double>, 3> lines;
    /// F x 3C, row-major.
    std::vector<double> basis;
    Vec3 box_min = Vec3::Zero();
    Vec3 box_max = Vec3::Ones();

    static VmTexture zeros(int channels, int resolution, int features);
    /// Throws on inconsistent sizes, R < 2, an empty box or non-finite entries.
    void validate() const;
};

struct FeatureSample {
    std::vector<double> features;
    bool clamped = false;  ///< the query lay outside the box and was clamped
};

FeatureSample eval_features(const VmTexture& tex, const Vec3& x);

inline constexpr int kFeatureOctaves = 2;
inline constexpr int kDirectionOctaves = 6;

/// Width of encode_frequencies output for F features.
constexpr int encoded_width(int features) {
    return features * (1 + 2 * kFeatureOctaves) + 3 * (1 + 2 * kDirectionOctaves);
}

struct Encoding {
    std::vector<double> values;
    bool normalized = false;  ///< the direction was rescaled to unit length
};

/// [f, sin(pi f), cos(pi f), sin(2 pi f), cos(2 pi f), d, sin(pi d), cos(pi d), ...,
/// sin(32 pi d), cos(32 pi d)], each block covering the whole vector.
Encoding encode_frequencies(std::span<const double> features, const Vec3& dir);

/// Real spherical harmonics up to degree 2 (no Condon-Shortley phase):
///   Y00 = 0.282095
///   Y1-1 = 0.488603 y,  Y10 = 0.488603 z,  Y11 = 0.488603 x
///   Y2-2 = 1.092548 xy, Y2-1 = 1.092548 yz, Y20 = 0.315392 (3z^2 - 1)
///   Y21 = 1.092548 xz,  Y22 = 0.546274 (x^2 - y^2)
std::array<double, 9> sh_basis(const Vec3& dir);

struct DenseLayer {
    int in = 0, out = 0;
    std::vector<double> weight;  ///< out x in, row-major
    std::vector<double> bias;    ///< out
};

/// Linear(99, 64), ReLU, Linear(64, 64), ReLU, Linear(64, 3), sigmoid.
struct HqDecoder {
    std::array<DenseLayer, 3> layers;

    static constexpr int kFeatures = 12;
    static HqDecoder zeros();
    void validate() const;
    /// Forward pass on an encoded input of width 99.
    Vec3 forward(std::span<const double> input) const;
};

enum class DecoderKind { Hq, Fast };

/// HQ decodes 12 features through the MLP; Fast reads 27 features as SH
/// coefficients, channel-major (coefficient k of channel c at c * 9 + k).
struct Decoder {
    DecoderKind kind = DecoderKind::Fast;
    HqDecoder hq;

    int feature_count() const { return kind == DecoderKind::Hq ? HqDecoder::kFeatures : 27; }
};

/// Unclamped SH colour for 27 channel-major coefficients.
Vec3 sh_color(std::span<const double> coefficients, const Vec3& dir);

/// Colour of one surface sample; throws when the feature width does not
/// match the decoder.
Vec3 decode_color(const Decoder& dec, std::span<const double> features, const Vec3& dir);

/// Named row-major tensors stored as a JSON manifest plus one raw
/// little-endian binary file.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
};
using TensorMap = std::map<std::string, Tensor>;

/// Writes `<manifest>` and the blob next to it (same stem, ".bin").
void write_tensors(const TensorMap& tensors, const std::filesystem::path& manifest, const std::string& dtype = "float64");
TensorMap read_tensors(const std::filesystem::path& manifest);

/// Tensors "layers.{0,1,2}.{weight,bias}".
HqDecoder load_hq_decoder(const std::filesystem::path& manifest);
void save_hq_decoder(const HqDecoder& dec, const std::filesystem::path& manifest);

/// Tensors "planes.{xy,yz,zx}", "lines.{z,x,y}", "basis" and "box" (2 x 3).
VmTexture load_texture(const std::filesystem::path& manifest);
void save_texture(const VmTexture& tex, const std::filesystem::path& manifest);

struct ColorSample {
    Vec3 point;
    Vec3 dir;
    Vec3 rgb;
};

struct ShPointFit {
    Vec3 point;
    std::array<double, 27> coefficients{};
    std::size_t samples = 0;
    double residual = 0.0;  ///< root of the summed squared colour error
};

struct ShFit {
    std::vector<ShPointFit> points;  ///< in order of first appearance
    double rms = 0.0;                ///< over all samples and channels
};

/// Least-squares SH coefficients per distinct sample point. Throws when a
/// point's directions do not determine all nine basis functions.
ShFit fit_sh(std::span<const ColorSample> samples);

/// Colours every vertex from the texture seen along `view`; the geometry is
/// returned unchanged.
IndexedMesh bake_vertex_colors(const IndexedMesh& mesh, const VmTexture& tex, const Decoder& dec, const Vec3& view,
                               int threads = 0);

}  // namespace dmc
