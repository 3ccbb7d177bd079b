#include "robustdet/diffusion/predictor.hpp"

#include "robustdet/core/error.hpp"
#include "robustdet/core/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <cstring>

namespace robustdet::diffusion {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;

std::string hash_id(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto* v : {&a, &b, &c}) {
        for (double x : *v) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &x, sizeof(double));
            for (unsigned char byte : bytes) {
                h ^= byte;
                h *= 1099511628211ULL;
            }
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "gaussian-%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string ConstantPredictor::id() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "constant-%.17g", value_);
    return buf;
}

GaussianPredictor GaussianPredictor::untrained(std::size_t channels, std::size_t height, std::size_t width) {
    const std::size_t d = channels * height * width;
    std::vector<double> basis(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) basis[i * d + i] = 1.0;
    return GaussianPredictor(channels, height, width, std::vector<double>(d, 0.0), std::move(basis),
                             std::vector<double>(d, 1.0));
}

GaussianPredictor::GaussianPredictor(std::size_t channels, std::size_t height, std::size_t width,
                                     std::vector<double> mean, std::vector<double> basis, std::vector<double> variances)
    : c_(channels), h_(height), w_(width), mean_(std::move(mean)), basis_(std::move(basis)),
      variances_(std::move(variances)) {
    const std::size_t d = dimension();
    if (d == 0 || mean_.size() != d || variances_.size() != d || basis_.size() != d * d) {
        throw ContractError("gaussian predictor: parameter sizes do not match the image dimension");
    }
    id_ = hash_id(mean_, basis_, variances_);
}

Tensor GaussianPredictor::predict(const Tensor& x_t, const Timestep& t) const {
    if (x_t.sample_size() != dimension()) throw ContractError("gaussian predictor: input dimension mismatch");
    const auto n = static_cast<Eigen::Index>(x_t.batch());
    const auto d = static_cast<Eigen::Index>(dimension());
    const double ab = t.model_alpha_bar;
    const double sa = std::sqrt(ab);
    const double s1 = std::sqrt(std::max(0.0, 1.0 - ab));

    ConstMatMap x(x_t.data(), n, d);
    ConstMatMap u(basis_.data(), d, d);
    const Eigen::Map<const Eigen::RowVectorXd> mu(mean_.data(), d);
    Mat centred = x.rowwise() - sa * mu;
    Mat z = centred * u;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double denom = ab * variances_[static_cast<std::size_t>(i)] + (1.0 - ab);
        z.col(i) *= denom > 0.0 ? s1 / denom : 0.0;
    }
    Tensor out(x_t.shape());
    MatMap(out.data(), n, d).noalias() = z * u.transpose();
    return out;
}

Container GaussianPredictor::to_container() const {
    Container c;
    c.kind = "noise-predictor";
    c.attributes = {{"family", "gaussian"},
                    {"channels", std::to_string(c_)},
                    {"height", std::to_string(h_)},
                    {"width", std::to_string(w_)}};
    const std::size_t d = dimension();
    c.arrays.push_back({"mean", {d}, mean_});
    c.arrays.push_back({"basis", {d, d}, basis_});
    c.arrays.push_back({"variances", {d}, variances_});
    return c;
}

GaussianPredictor GaussianPredictor::from_container(const Container& c) {
    if (c.kind != "noise-predictor") {
        throw IngestionError("expected a noise-predictor checkpoint, found kind '" + c.kind + "'");
    }
    if (c.attribute("family") != "gaussian") throw IngestionError("unsupported noise-predictor family");
    try {
        return GaussianPredictor(std::stoul(c.attribute("channels")), std::stoul(c.attribute("height")),
                                 std::stoul(c.attribute("width")), c.array("mean").values, c.array("basis").values,
                                 c.array("variances").values);
    } catch (const ContractError& e) {
        throw IngestionError(std::string("noise-predictor checkpoint: ") + e.what());
    }
}

GaussianPredictor train_toy_diffusion(const Tensor& data, const ToyDiffusionConfig& cfg) {
    if (data.empty() || data.batch() == 0) throw EmptyDatasetError("train_toy_diffusion: no training images");
    if (data.rank() != 4) throw ContractError("train_toy_diffusion: expected (N, C, H, W) data");
    if (!(cfg.variance_floor > 0.0)) throw ConfigError("diffusion.variance_floor", "must be > 0");
    const auto n = static_cast<Eigen::Index>(data.batch());
    const auto d = static_cast<Eigen::Index>(data.sample_size());
    ConstMatMap x(data.data(), n, d);
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Mat centred = x.rowwise() - mu;
    const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("train_toy_diffusion: eigendecomposition failed");
    // Fix each eigenvector's sign so the fit is reproducible bit for bit.
    Mat basis = solver.eigenvectors();
    std::vector<double> variances(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::Index arg = 0;
        basis.col(j).cwiseAbs().maxCoeff(&arg);
        if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
        variances[static_cast<std::size_t>(j)] = std::max(solver.eigenvalues()(j), cfg.variance_floor);
    }
    return GaussianPredictor(data.dim(1), data.dim(2), data.dim(3), std::vector<double>(mu.data(), mu.data() + d),
                             std::vector<double>(basis.data(), basis.data() + basis.size()), std::move(variances));
}

double denoising_loss(const NoisePredictor& predictor, const Tensor& data, const DiffusionSchedule& schedule,
                      std::uint64_t seed, std::size_t draws) {
    if (data.empty()) throw EmptyDatasetError("denoising_loss: no images");
    if (schedule.num_steps() == 0) throw ContractError("denoising_loss: schedule has no noisy states");
    Rng rng(seed);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < draws; ++r) {
        for (std::size_t i = 0; i < data.batch(); ++i) {
            const Timestep ts = schedule.timestep(1 + rng.below(schedule.num_steps()));
            const double sa = std::sqrt(ts.alpha_bar), s1 = std::sqrt(1.0 - ts.alpha_bar);
            Tensor xt = data.slice_batch(i, i + 1);
            Tensor eps(xt.shape());
            for (std::size_t k = 0; k < xt.size(); ++k) {
                eps[k] = rng.normal();
                xt[k] = sa * xt[k] + s1 * eps[k];
            }
            const Tensor pred = predictor.predict(xt, ts);
            for (std::size_t k = 0; k < xt.size(); ++k) total += (pred[k] - eps[k]) * (pred[k] - eps[k]);
            count += xt.size();
        }
    }
    return total / static_cast<double>(count);
}

void save_predictor(const std::filesystem::path& path, const GaussianPredictor& predictor) {
    write_container(path, predictor.to_container());
}

GaussianPredictor load_predictor(const std::filesystem::path& path) {
    const Container c = read_container(path);
    try {
        return GaussianPredictor::from_container(c);
    } catch (const IngestionError& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

}  // namespace robustdet::diffusion
