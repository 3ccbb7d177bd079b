#include "robustdet/model/layers.hpp"

#include "robustdet/core/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>

namespace robustdet::model {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

constexpr double kLayerNormEps = 1e-5;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_normal(std::span<double> out, double stddev, Rng& rng) {
    for (double& v : out) v = rng.normal(0.0, stddev);
}

/// Walks a flat parameter span block by block in declaration order.
template <typename Span>
class BlockReader {
public:
    explicit BlockReader(Span span) : span_(span) {}
    Span next(std::size_t n) {
        Span s = span_.subspan(offset_, n);
        offset_ += n;
        return s;
    }

private:
    Span span_;
    std::size_t offset_ = 0;
};

// Row-wise layer norm on an L x d matrix. Stores normalized values and the
// inverse standard deviation per row for the backward pass.
void layer_norm_rows(const Mat& x, std::span<const double> gamma, std::span<const double> beta, Mat& xhat,
                     Vec& inv_std, Mat& y) {
    const auto d = x.cols();
    xhat.resize(x.rows(), d);
    inv_std.resize(x.rows());
    y.resize(x.rows(), d);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
        for (Eigen::Index c = 0; c < d; ++c) y(r, c) = gamma[c] * xhat(r, c) + beta[c];
    }
}

Mat layer_norm_rows_backward(const Mat& dy, const Mat& xhat, const Vec& inv_std, std::span<const double> gamma,
                             std::span<double> dgamma, std::span<double> dbeta) {
    const auto d = dy.cols();
    Mat dx(dy.rows(), d);
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        Eigen::RowVectorXd dxhat(d);
        for (Eigen::Index c = 0; c < d; ++c) {
            dxhat(c) = dy(r, c) * gamma[c];
            if (!dgamma.empty()) {
                dgamma[c] += dy(r, c) * xhat(r, c);
                dbeta[c] += dy(r, c);
            }
        }
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = (dxhat.array() * xhat.row(r).array()).mean();
        dx.row(r) = inv_std(r) * (dxhat.array() - mean_dxhat - xhat.row(r).array() * mean_dxhat_xhat);
    }
    return dx;
}

Tensor to_tensor(const Mat& m, Tensor::Shape shape) {
    return Tensor(std::move(shape), std::vector<double>(m.data(), m.data() + m.size()));
}

}  // namespace

std::size_t ParameterShape::size() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t Layer::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameter_shapes()) n += p.size();
    return n;
}

void Layer::initialize(std::span<double> params, Rng&) const {
    std::fill(params.begin(), params.end(), 0.0);
}

// --- InputNormalize ----------------------------------------------------------

Tensor InputNormalize::forward(const Tensor& input, std::span<const double>, LayerCache*) const {
    Tensor out = input;
    for (double& v : out.values()) v = (v - shift_) * scale_;
    return out;
}

Tensor InputNormalize::backward(const Tensor& grad_output, const LayerCache&, std::span<const double>,
                                std::span<double>) const {
    Tensor out = grad_output;
    for (double& v : out.values()) v *= scale_;
    return out;
}

// --- Conv2d ------------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
               std::size_t padding)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), stride_(stride), padding_(padding) {
    if (kernel == 0 || stride == 0) throw ContractError("conv2d: kernel and stride must be positive");
}

std::vector<ParameterShape> Conv2d::parameter_shapes() const {
    return {{"weight", {out_channels_, in_channels_, kernel_, kernel_}}, {"bias", {out_channels_}}};
}

void Conv2d::initialize(std::span<double> params, Rng& rng) const {
    const std::size_t fan_in = in_channels_ * kernel_ * kernel_;
    const std::size_t nw = out_channels_ * fan_in;
    fill_normal(params.first(nw), std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
    std::fill(params.begin() + nw, params.end(), 0.0);
}

namespace {

// (C, H, W) image -> (C*k*k, oh*ow) column matrix.
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t oh, std::size_t ow, Mat& col) {
    col.setZero(static_cast<Eigen::Index>(c * k * k), static_cast<Eigen::Index>(oh * ow));
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const auto row = static_cast<Eigen::Index>((ch * k + ky) * k + kx);
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                        if (ix < 0 || ix >= static_cast<long>(w)) continue;
                        col(row, static_cast<Eigen::Index>(oy * ow + ox)) = img[(ch * h + iy) * w + ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const Mat& col, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
                std::size_t pad, std::size_t oh, std::size_t ow, double* img) {
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const auto row = static_cast<Eigen::Index>((ch * k + ky) * k + kx);
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                        if (ix < 0 || ix >= static_cast<long>(w)) continue;
                        img[(ch * h + iy) * w + ix] += col(row, static_cast<Eigen::Index>(oy * ow + ox));
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const {
    if (input.rank() != 4 || input.dim(1) != in_channels_) {
        throw ContractError("conv2d: expected (N, " + std::to_string(in_channels_) + ", H, W) input");
    }
    const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
    const std::size_t oh = output_extent(h), ow = output_extent(w);
    const std::size_t kk = in_channels_ * kernel_ * kernel_;
    ConstMatMap weight(params.data(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(kk));
    ConstVecMap bias(params.data() + out_channels_ * kk, static_cast<Eigen::Index>(out_channels_));

    Tensor out({n, out_channels_, oh, ow});
    Mat col;
    for (std::size_t i = 0; i < n; ++i) {
        im2col(input.sample(i).data(), in_channels_, h, w, kernel_, stride_, padding_, oh, ow, col);
        MatMap y(out.sample(i).data(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(oh * ow));
        y.noalias() = weight * col;
        y.colwise() += bias;
    }
    if (cache) cache->saved = {input};
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                        std::span<double> param_grad) const {
    const Tensor& input = cache.saved.at(0);
    const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
    const std::size_t oh = output_extent(h), ow = output_extent(w);
    const std::size_t kk = in_channels_ * kernel_ * kernel_;
    ConstMatMap weight(params.data(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(kk));

    Tensor grad_input(input.shape());
    Mat col, dcol;
    for (std::size_t i = 0; i < n; ++i) {
        ConstMatMap dy(grad_output.sample(i).data(), static_cast<Eigen::Index>(out_channels_),
                       static_cast<Eigen::Index>(oh * ow));
        if (!param_grad.empty()) {
            im2col(input.sample(i).data(), in_channels_, h, w, kernel_, stride_, padding_, oh, ow, col);
            MatMap dweight(param_grad.data(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(kk));
            VecMap dbias(param_grad.data() + out_channels_ * kk, static_cast<Eigen::Index>(out_channels_));
            dweight.noalias() += dy * col.transpose();
            dbias += dy.rowwise().sum();
        }
        dcol.noalias() = weight.transpose() * dy;
        col2im_add(dcol, in_channels_, h, w, kernel_, stride_, padding_, oh, ow, grad_input.sample(i).data());
    }
    return grad_input;
}

// --- SiLU --------------------------------------------------------------------

Tensor SiLU::forward(const Tensor& input, std::span<const double>, LayerCache* cache) const {
    Tensor out = input;
    for (double& v : out.values()) v = v * sigmoid(v);
    if (cache) cache->saved = {input};
    return out;
}

Tensor SiLU::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double>,
                      std::span<double>) const {
    const Tensor& input = cache.saved.at(0);
    Tensor out = grad_output;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = sigmoid(input[i]);
        out[i] *= s * (1.0 + input[i] * (1.0 - s));
    }
    return out;
}

// --- Flatten -----------------------------------------------------------------

Tensor Flatten::forward(const Tensor& input, std::span<const double>, LayerCache* cache) const {
    if (cache) cache->saved = {Tensor(input.shape())};
    return input.reshaped({input.batch(), input.sample_size()});
}

Tensor Flatten::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double>,
                         std::span<double>) const {
    return grad_output.reshaped(cache.saved.at(0).shape());
}

// --- Linear ------------------------------------------------------------------

Linear::Linear(std::size_t in_features, std::size_t out_features) : in_(in_features), out_(out_features) {}

std::vector<ParameterShape> Linear::parameter_shapes() const {
    return {{"weight", {out_, in_}}, {"bias", {out_}}};
}

void Linear::initialize(std::span<double> params, Rng& rng) const {
    fill_normal(params.first(out_ * in_), 1.0 / std::sqrt(static_cast<double>(in_)), rng);
    std::fill(params.begin() + out_ * in_, params.end(), 0.0);
}

Tensor Linear::forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const {
    if (input.sample_size() != in_) {
        throw ContractError("linear: expected " + std::to_string(in_) + " input features, got " +
                            std::to_string(input.sample_size()));
    }
    const auto n = static_cast<Eigen::Index>(input.batch());
    ConstMatMap x(input.data(), n, static_cast<Eigen::Index>(in_));
    ConstMatMap weight(params.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    ConstVecMap bias(params.data() + out_ * in_, static_cast<Eigen::Index>(out_));
    Mat y = x * weight.transpose();
    y.rowwise() += bias.transpose();
    if (cache) cache->saved = {input};
    return to_tensor(y, {input.batch(), out_});
}

Tensor Linear::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                        std::span<double> param_grad) const {
    const Tensor& input = cache.saved.at(0);
    const auto n = static_cast<Eigen::Index>(input.batch());
    ConstMatMap x(input.data(), n, static_cast<Eigen::Index>(in_));
    ConstMatMap dy(grad_output.data(), n, static_cast<Eigen::Index>(out_));
    ConstMatMap weight(params.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    if (!param_grad.empty()) {
        MatMap dweight(param_grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
        VecMap dbias(param_grad.data() + out_ * in_, static_cast<Eigen::Index>(out_));
        dweight.noalias() += dy.transpose() * x;
        dbias += dy.colwise().sum().transpose();
    }
    Mat dx = dy * weight;
    return to_tensor(dx, input.shape());
}

// --- PatchEmbed --------------------------------------------------------------

PatchEmbed::PatchEmbed(std::size_t channels, std::size_t height, std::size_t width, std::size_t patch,
                       std::size_t dim)
    : channels_(channels), height_(height), width_(width), patch_(patch), dim_(dim) {
    if (patch == 0 || height % patch != 0 || width % patch != 0) {
        throw ContractError("patch_embed: image size must be a multiple of the patch size");
    }
}

std::vector<ParameterShape> PatchEmbed::parameter_shapes() const {
    return {{"weight", {dim_, channels_ * patch_ * patch_}}, {"bias", {dim_}}, {"position", {tokens(), dim_}}};
}

void PatchEmbed::initialize(std::span<double> params, Rng& rng) const {
    const std::size_t fan_in = channels_ * patch_ * patch_;
    BlockReader<std::span<double>> blocks(params);
    fill_normal(blocks.next(dim_ * fan_in), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    auto bias = blocks.next(dim_);
    std::fill(bias.begin(), bias.end(), 0.0);
    fill_normal(blocks.next(tokens() * dim_), 0.02, rng);
}

namespace {

// Patch matrix (L, C*p*p) for one image.
Mat extract_patches(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t p) {
    const std::size_t py = h / p, px = w / p;
    Mat out(static_cast<Eigen::Index>(py * px), static_cast<Eigen::Index>(c * p * p));
    for (std::size_t ty = 0; ty < py; ++ty) {
        for (std::size_t tx = 0; tx < px; ++tx) {
            const auto row = static_cast<Eigen::Index>(ty * px + tx);
            for (std::size_t ch = 0; ch < c; ++ch) {
                for (std::size_t y = 0; y < p; ++y) {
                    for (std::size_t x = 0; x < p; ++x) {
                        out(row, static_cast<Eigen::Index>((ch * p + y) * p + x)) =
                            img[(ch * h + ty * p + y) * w + tx * p + x];
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

Tensor PatchEmbed::forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const {
    if (input.rank() != 4 || input.dim(1) != channels_ || input.dim(2) != height_ || input.dim(3) != width_) {
        throw ContractError("patch_embed: input shape does not match the configured image size");
    }
    const std::size_t fan_in = channels_ * patch_ * patch_, L = tokens();
    BlockReader<std::span<const double>> blocks(params);
    ConstMatMap weight(blocks.next(dim_ * fan_in).data(), static_cast<Eigen::Index>(dim_),
                       static_cast<Eigen::Index>(fan_in));
    ConstVecMap bias(blocks.next(dim_).data(), static_cast<Eigen::Index>(dim_));
    ConstMatMap position(blocks.next(L * dim_).data(), static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(dim_));

    Tensor out({input.batch(), L, dim_});
    for (std::size_t i = 0; i < input.batch(); ++i) {
        const Mat patches = extract_patches(input.sample(i).data(), channels_, height_, width_, patch_);
        MatMap y(out.sample(i).data(), static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(dim_));
        y.noalias() = patches * weight.transpose();
        y.rowwise() += bias.transpose();
        y += position;
    }
    if (cache) cache->saved = {input};
    return out;
}

Tensor PatchEmbed::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                            std::span<double> param_grad) const {
    const Tensor& input = cache.saved.at(0);
    const std::size_t fan_in = channels_ * patch_ * patch_, L = tokens();
    ConstMatMap weight(params.data(), static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(fan_in));
    Tensor grad_input(input.shape());
    const std::size_t px = width_ / patch_;
    for (std::size_t i = 0; i < input.batch(); ++i) {
        ConstMatMap dy(grad_output.sample(i).data(), static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(dim_));
        if (!param_grad.empty()) {
            const Mat patches = extract_patches(input.sample(i).data(), channels_, height_, width_, patch_);
            BlockReader<std::span<double>> blocks(param_grad);
            MatMap dweight(blocks.next(dim_ * fan_in).data(), static_cast<Eigen::Index>(dim_),
                           static_cast<Eigen::Index>(fan_in));
            VecMap dbias(blocks.next(dim_).data(), static_cast<Eigen::Index>(dim_));
            MatMap dposition(blocks.next(L * dim_).data(), static_cast<Eigen::Index>(L),
                             static_cast<Eigen::Index>(dim_));
            dweight.noalias() += dy.transpose() * patches;
            dbias += dy.colwise().sum().transpose();
            dposition += dy;
        }
        const Mat dpatches = dy * weight;
        double* dimg = grad_input.sample(i).data();
        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t ty = t / px, tx = t % px;
            for (std::size_t ch = 0; ch < channels_; ++ch) {
                for (std::size_t y = 0; y < patch_; ++y) {
                    for (std::size_t x = 0; x < patch_; ++x) {
                        dimg[(ch * height_ + ty * patch_ + y) * width_ + tx * patch_ + x] +=
                            dpatches(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>((ch * patch_ + y) * patch_ + x));
                    }
                }
            }
        }
    }
    return grad_input;
}

// --- TransformerBlock --------------------------------------------------------

TransformerBlock::TransformerBlock(std::size_t dim, std::size_t hidden) : dim_(dim), hidden_(hidden) {}

std::vector<ParameterShape> TransformerBlock::parameter_shapes() const {
    return {
        {"ln1_gamma", {dim_}},        {"ln1_beta", {dim_}},      {"q_weight", {dim_, dim_}},
        {"q_bias", {dim_}},           {"k_weight", {dim_, dim_}}, {"k_bias", {dim_}},
        {"v_weight", {dim_, dim_}},   {"v_bias", {dim_}},        {"o_weight", {dim_, dim_}},
        {"o_bias", {dim_}},           {"ln2_gamma", {dim_}},     {"ln2_beta", {dim_}},
        {"mlp1_weight", {hidden_, dim_}}, {"mlp1_bias", {hidden_}}, {"mlp2_weight", {dim_, hidden_}},
        {"mlp2_bias", {dim_}},
    };
}

void TransformerBlock::initialize(std::span<double> params, Rng& rng) const {
    BlockReader<std::span<double>> blocks(params);
    const double sd = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (const auto& shape : parameter_shapes()) {
        auto block = blocks.next(shape.size());
        if (shape.name.ends_with("gamma")) {
            std::fill(block.begin(), block.end(), 1.0);
        } else if (shape.name.ends_with("bias") || shape.name.ends_with("beta")) {
            std::fill(block.begin(), block.end(), 0.0);
        } else if (shape.name == "mlp2_weight") {
            fill_normal(block, 1.0 / std::sqrt(static_cast<double>(hidden_)), rng);
        } else {
            fill_normal(block, sd, rng);
        }
    }
}

namespace {

struct BlockParams {
    std::span<const double> ln1_g, ln1_b, ln2_g, ln2_b;
    ConstMatMap wq, wk, wv, wo, w1, w2;
    ConstVecMap bq, bk, bv, bo, b1, b2;
};

BlockParams read_block_params(std::span<const double> params, std::size_t d, std::size_t hd) {
    BlockReader<std::span<const double>> b(params);
    const auto D = static_cast<Eigen::Index>(d), H = static_cast<Eigen::Index>(hd);
    auto ln1_g = b.next(d);
    auto ln1_b = b.next(d);
    auto wq = b.next(d * d);
    auto bq = b.next(d);
    auto wk = b.next(d * d);
    auto bk = b.next(d);
    auto wv = b.next(d * d);
    auto bv = b.next(d);
    auto wo = b.next(d * d);
    auto bo = b.next(d);
    auto ln2_g = b.next(d);
    auto ln2_b = b.next(d);
    auto w1 = b.next(hd * d);
    auto b1 = b.next(hd);
    auto w2 = b.next(d * hd);
    auto b2 = b.next(d);
    return BlockParams{ln1_g,
                       ln1_b,
                       ln2_g,
                       ln2_b,
                       ConstMatMap(wq.data(), D, D),
                       ConstMatMap(wk.data(), D, D),
                       ConstMatMap(wv.data(), D, D),
                       ConstMatMap(wo.data(), D, D),
                       ConstMatMap(w1.data(), H, D),
                       ConstMatMap(w2.data(), D, H),
                       ConstVecMap(bq.data(), D),
                       ConstVecMap(bk.data(), D),
                       ConstVecMap(bv.data(), D),
                       ConstVecMap(bo.data(), D),
                       ConstVecMap(b1.data(), H),
                       ConstVecMap(b2.data(), D)};
}

struct BlockGrads {
    std::span<double> ln1_g, ln1_b, ln2_g, ln2_b;
    MatMap wq, wk, wv, wo, w1, w2;
    VecMap bq, bk, bv, bo, b1, b2;
};

BlockGrads read_block_grads(std::span<double> grads, std::size_t d, std::size_t hd) {
    BlockReader<std::span<double>> b(grads);
    const auto D = static_cast<Eigen::Index>(d), H = static_cast<Eigen::Index>(hd);
    auto ln1_g = b.next(d);
    auto ln1_b = b.next(d);
    auto wq = b.next(d * d);
    auto bq = b.next(d);
    auto wk = b.next(d * d);
    auto bk = b.next(d);
    auto wv = b.next(d * d);
    auto bv = b.next(d);
    auto wo = b.next(d * d);
    auto bo = b.next(d);
    auto ln2_g = b.next(d);
    auto ln2_b = b.next(d);
    auto w1 = b.next(hd * d);
    auto b1 = b.next(hd);
    auto w2 = b.next(d * hd);
    auto b2 = b.next(d);
    return BlockGrads{ln1_g,
                      ln1_b,
                      ln2_g,
                      ln2_b,
                      MatMap(wq.data(), D, D),
                      MatMap(wk.data(), D, D),
                      MatMap(wv.data(), D, D),
                      MatMap(wo.data(), D, D),
                      MatMap(w1.data(), H, D),
                      MatMap(w2.data(), D, H),
                      VecMap(bq.data(), D),
                      VecMap(bk.data(), D),
                      VecMap(bv.data(), D),
                      VecMap(bo.data(), D),
                      VecMap(b1.data(), H),
                      VecMap(b2.data(), D)};
}

Mat affine(const Mat& x, const ConstMatMap& w, const ConstVecMap& b) {
    Mat y = x * w.transpose();
    y.rowwise() += b.transpose();
    return y;
}

void softmax_rows(Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

// Everything the backward pass of one sample needs.
struct BlockActivations {
    Mat x, xhat1, q, k, v, a, o, h, xhat2, pre, act;
    Vec inv1, inv2;
    Mat out;
};

BlockActivations block_forward(const Mat& x, const BlockParams& p, std::size_t d) {
    BlockActivations s;
    s.x = x;
    Mat u1;
    layer_norm_rows(x, p.ln1_g, p.ln1_b, s.xhat1, s.inv1, u1);
    s.q = affine(u1, p.wq, p.bq);
    s.k = affine(u1, p.wk, p.bk);
    s.v = affine(u1, p.wv, p.bv);
    s.a = (s.q * s.k.transpose()) / std::sqrt(static_cast<double>(d));
    softmax_rows(s.a);
    s.o = s.a * s.v;
    s.h = x + affine(s.o, p.wo, p.bo);
    Mat u2;
    layer_norm_rows(s.h, p.ln2_g, p.ln2_b, s.xhat2, s.inv2, u2);
    s.pre = affine(u2, p.w1, p.b1);
    s.act = s.pre.unaryExpr([](double v) { return v * sigmoid(v); });
    s.out = s.h + affine(s.act, p.w2, p.b2);
    return s;
}

}  // namespace

Tensor TransformerBlock::forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const {
    if (input.rank() != 3 || input.dim(2) != dim_) throw ContractError("transformer_block: expected (N, L, dim)");
    const auto L = static_cast<Eigen::Index>(input.dim(1)), D = static_cast<Eigen::Index>(dim_);
    const BlockParams p = read_block_params(params, dim_, hidden_);
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.batch(); ++i) {
        const Mat x = ConstMatMap(input.sample(i).data(), L, D);
        const BlockActivations s = block_forward(x, p, dim_);
        MatMap(out.sample(i).data(), L, D) = s.out;
    }
    if (cache) cache->saved = {input};
    return out;
}

Tensor TransformerBlock::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                                  std::span<double> param_grad) const {
    const Tensor& input = cache.saved.at(0);
    const auto L = static_cast<Eigen::Index>(input.dim(1)), D = static_cast<Eigen::Index>(dim_);
    const BlockParams p = read_block_params(params, dim_, hidden_);
    const bool want_params = !param_grad.empty();
    std::vector<double> scratch;
    if (!want_params) scratch.assign(parameter_count(), 0.0);
    BlockGrads g = read_block_grads(want_params ? param_grad : std::span<double>(scratch), dim_, hidden_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));

    Tensor grad_input(input.shape());
    for (std::size_t i = 0; i < input.batch(); ++i) {
        // Activations are recomputed rather than cached per sample.
        const BlockActivations s = block_forward(ConstMatMap(input.sample(i).data(), L, D), p, dim_);
        const Mat dout = ConstMatMap(grad_output.sample(i).data(), L, D);

        // MLP branch: out = h + act W2^T + b2, act = silu(pre), pre = u2 W1^T + b1.
        Mat u2 = s.xhat2;
        for (Eigen::Index c = 0; c < D; ++c) {
            u2.col(c) = u2.col(c) * p.ln2_g[static_cast<std::size_t>(c)] + Mat::Constant(L, 1, p.ln2_b[static_cast<std::size_t>(c)]);
        }
        g.w2.noalias() += dout.transpose() * s.act;
        g.b2 += dout.colwise().sum().transpose();
        Mat dact = dout * p.w2;
        Mat dpre = dact;
        for (Eigen::Index r = 0; r < dpre.rows(); ++r) {
            for (Eigen::Index c = 0; c < dpre.cols(); ++c) {
                const double z = s.pre(r, c), sg = sigmoid(z);
                dpre(r, c) *= sg * (1.0 + z * (1.0 - sg));
            }
        }
        g.w1.noalias() += dpre.transpose() * u2;
        g.b1 += dpre.colwise().sum().transpose();
        const Mat du2 = dpre * p.w1;
        Mat dh = dout + layer_norm_rows_backward(du2, s.xhat2, s.inv2, p.ln2_g, g.ln2_g, g.ln2_b);

        // Attention branch: h = x + o Wo^T + bo.
        Mat u1 = s.xhat1;
        for (Eigen::Index c = 0; c < D; ++c) {
            u1.col(c) = u1.col(c) * p.ln1_g[static_cast<std::size_t>(c)] + Mat::Constant(L, 1, p.ln1_b[static_cast<std::size_t>(c)]);
        }
        g.wo.noalias() += dh.transpose() * s.o;
        g.bo += dh.colwise().sum().transpose();
        const Mat d_o = dh * p.wo;
        const Mat da = d_o * s.v.transpose();
        const Mat dv = s.a.transpose() * d_o;
        Mat ds = s.a.array() * (da.array() - (da.array() * s.a.array()).rowwise().sum().replicate(1, da.cols()));
        ds *= scale;
        const Mat dq = ds * s.k;
        const Mat dk = ds.transpose() * s.q;
        g.wq.noalias() += dq.transpose() * u1;
        g.bq += dq.colwise().sum().transpose();
        g.wk.noalias() += dk.transpose() * u1;
        g.bk += dk.colwise().sum().transpose();
        g.wv.noalias() += dv.transpose() * u1;
        g.bv += dv.colwise().sum().transpose();
        const Mat du1 = dq * p.wq + dk * p.wk + dv * p.wv;
        const Mat dx = dh + layer_norm_rows_backward(du1, s.xhat1, s.inv1, p.ln1_g, g.ln1_g, g.ln1_b);
        MatMap(grad_input.sample(i).data(), L, D) = dx;
    }
    return grad_input;
}

// --- LayerNorm ---------------------------------------------------------------

std::vector<ParameterShape> LayerNorm::parameter_shapes() const {
    return {{"gamma", {dim_}}, {"beta", {dim_}}};
}

void LayerNorm::initialize(std::span<double> params, Rng&) const {
    std::fill(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(dim_), 1.0);
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(dim_), params.end(), 0.0);
}

Tensor LayerNorm::forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const {
    if (input.rank() != 3 || input.dim(2) != dim_) throw ContractError("layer_norm: expected (N, L, dim)");
    const auto rows = static_cast<Eigen::Index>(input.batch() * input.dim(1));
    const Mat x = ConstMatMap(input.data(), rows, static_cast<Eigen::Index>(dim_));
    Mat xhat, y;
    Vec inv;
    layer_norm_rows(x, params.first(dim_), params.subspan(dim_, dim_), xhat, inv, y);
    if (cache) cache->saved = {to_tensor(xhat, input.shape()), Tensor({inv.size()}, std::vector<double>(inv.data(), inv.data() + inv.size()))};
    return to_tensor(y, input.shape());
}

Tensor LayerNorm::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                           std::span<double> param_grad) const {
    const Tensor& xhat_t = cache.saved.at(0);
    const Tensor& inv_t = cache.saved.at(1);
    const auto rows = static_cast<Eigen::Index>(xhat_t.batch() * xhat_t.dim(1));
    const Mat xhat = ConstMatMap(xhat_t.data(), rows, static_cast<Eigen::Index>(dim_));
    const Vec inv = ConstVecMap(inv_t.data(), rows);
    const Mat dy = ConstMatMap(grad_output.data(), rows, static_cast<Eigen::Index>(dim_));
    std::span<double> dgamma, dbeta;
    if (!param_grad.empty()) {
        dgamma = param_grad.first(dim_);
        dbeta = param_grad.subspan(dim_, dim_);
    }
    const Mat dx = layer_norm_rows_backward(dy, xhat, inv, params.first(dim_), dgamma, dbeta);
    return to_tensor(dx, grad_output.shape());
}

// --- TokenMeanPool -----------------------------------------------------------

Tensor TokenMeanPool::forward(const Tensor& input, std::span<const double>, LayerCache* cache) const {
    if (input.rank() != 3) throw ContractError("token_mean_pool: expected (N, L, dim)");
    const std::size_t n = input.dim(0), L = input.dim(1), d = input.dim(2);
    Tensor out({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < L; ++t) {
            for (std::size_t c = 0; c < d; ++c) out[i * d + c] += input[(i * L + t) * d + c];
        }
        for (std::size_t c = 0; c < d; ++c) out[i * d + c] /= static_cast<double>(L);
    }
    if (cache) cache->saved = {Tensor(input.shape())};
    return out;
}

Tensor TokenMeanPool::backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double>,
                               std::span<double>) const {
    const auto& shape = cache.saved.at(0).shape();
    const std::size_t n = shape[0], L = shape[1], d = shape[2];
    Tensor out(shape);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < L; ++t) {
            for (std::size_t c = 0; c < d; ++c) out[(i * L + t) * d + c] = grad_output[i * d + c] / static_cast<double>(L);
        }
    }
    return out;
}

}  // namespace robustdet::model
