#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phantom.hpp"
#include "pose.hpp"
#include "random.hpp"

namespace dkbo {

inline constexpr int kNetHidden1 = 400;
inline constexpr int kNetHidden2 = 300;

// Scalar quality embedding network: 6 -> 400 -> 300 -> 1, ReLU hidden layers,
// identity output. Inputs are unit-cube normalized poses.
struct DeepKernelNet {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;

    bool finite() const {
        return w1.allFinite() && w2.allFinite() && w3.allFinite() && b1.allFinite() &&
               b2.allFinite() && b3.allFinite();
    }
};

struct NetGrads {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
};

inline DeepKernelNet init_net(std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&rng](Eigen::MatrixXd& m, int rows, int cols) {
        m.resize(rows, cols);
        const double bound = std::sqrt(6.0 / cols);  // symmetric fan-in scaling
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    };
    DeepKernelNet net;
    fill(net.w1, kNetHidden1, kPoseDims);
    fill(net.w2, kNetHidden2, kNetHidden1);
    fill(net.w3, 1, kNetHidden2);
    net.b1 = Eigen::VectorXd::Zero(kNetHidden1);
    net.b2 = Eigen::VectorXd::Zero(kNetHidden2);
    net.b3 = Eigen::VectorXd::Zero(1);
    return net;
}

// U holds one normalized pose per column.
inline Eigen::VectorXd net_forward_batch(const DeepKernelNet& net, const Eigen::MatrixXd& u) {
    Eigen::MatrixXd h1 = ((net.w1 * u).colwise() + net.b1).cwiseMax(0.0);
    Eigen::MatrixXd h2 = ((net.w2 * h1).colwise() + net.b2).cwiseMax(0.0);
    return ((net.w3 * h2).colwise() + net.b3).transpose();
}

inline double net_forward(const DeepKernelNet& net, const std::array<double, kPoseDims>& u) {
    Eigen::MatrixXd col(kPoseDims, 1);
    for (int d = 0; d < kPoseDims; ++d) col(d, 0) = u[d];
    return net_forward_batch(net, col)(0);
}

struct TrainConfig {
    double lr = 1e-3;
    int batch = 32;
    int epochs = 200;
    double split = 0.9;  // train fraction
    std::uint64_t seed = 0;

    void validate() const {
        if (!(split > 0.0 && split < 1.0))
            throw std::invalid_argument("TrainConfig: split must be in (0, 1)");
        if (batch < 1 || epochs < 1 || lr <= 0.0)
            throw std::invalid_argument("TrainConfig: counts must be >= 1 and lr > 0");
    }
};

struct OfflineSample {
    ProbePose pose;
    double q = 0.0;
    Variant variant = Variant::P0;
};

struct OfflineDataset {
    std::vector<OfflineSample> samples;
    Bounds bounds;

    // 6 x n matrix of normalized poses plus target vector
    std::pair<Eigen::MatrixXd, Eigen::VectorXd> design() const {
        Eigen::MatrixXd u(kPoseDims, samples.size());
        Eigen::VectorXd y(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto n = normalize(samples[i].pose, bounds);
            for (int d = 0; d < kPoseDims; ++d) u(d, static_cast<Eigen::Index>(i)) = n[d];
            y(static_cast<Eigen::Index>(i)) = samples[i].q;
        }
        return {std::move(u), std::move(y)};
    }
};

namespace net_detail {

inline double batch_mse(const DeepKernelNet& net, const Eigen::MatrixXd& u,
                        const Eigen::VectorXd& y) {
    return (net_forward_batch(net, u) - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace net_detail

// Gradient of batch mean squared error with respect to every parameter.
inline NetGrads net_grad(const DeepKernelNet& net, const Eigen::MatrixXd& u,
                         const Eigen::VectorXd& y) {
    const Eigen::Index b = u.cols();
    if (b == 0) throw std::invalid_argument("net_grad: empty batch");
    const Eigen::MatrixXd z1 = (net.w1 * u).colwise() + net.b1;
    const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
    const Eigen::MatrixXd z2 = (net.w2 * a1).colwise() + net.b2;
    const Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
    const Eigen::RowVectorXd f = ((net.w3 * a2).colwise() + net.b3).row(0);

    const Eigen::RowVectorXd df =
        2.0 / static_cast<double>(b) * (f - y.transpose());  // dMSE/df
    NetGrads g;
    g.w3 = df * a2.transpose();
    g.b3 = Eigen::VectorXd::Constant(1, df.sum());
    Eigen::MatrixXd dz2 =
        (net.w3.transpose() * df).cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
    g.w2 = dz2 * a1.transpose();
    g.b2 = dz2.rowwise().sum();
    Eigen::MatrixXd dz1 =
        (net.w2.transpose() * dz2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
    g.w1 = dz1 * u.transpose();
    g.b1 = dz1.rowwise().sum();
    return g;
}

inline NetGrads net_grad(const DeepKernelNet& net, const OfflineDataset& batch) {
    if (batch.samples.empty()) throw std::invalid_argument("net_grad: empty batch");
    const auto [u, y] = batch.design();
    return net_grad(net, u, y);
}

struct LearningCurve {
    std::vector<double> train_mse;  // one entry per epoch
    std::vector<double> val_mse;
};

// Mini-batch training with per-parameter adaptive steps (first and second
// moment estimates, bias corrected). Deterministic for a fixed seed; the
// validation subset is fixed up front and never trained on.
inline LearningCurve train_net(DeepKernelNet& net, const OfflineDataset& dataset,
                               const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.samples.size() < 10)
        throw std::invalid_argument("train_net: dataset must have at least 10 samples");
    const auto [u_all, y_all] = dataset.design();
    const Eigen::Index n = u_all.cols();
    auto n_train = static_cast<Eigen::Index>(cfg.split * static_cast<double>(n));
    n_train = std::max<Eigen::Index>(1, std::min(n - 1, n_train));

    Rng split_rng(mix_seed(cfg.seed, 0));
    const auto order = split_rng.permutation(static_cast<std::size_t>(n));
    Eigen::MatrixXd u_train(kPoseDims, n_train), u_val(kPoseDims, n - n_train);
    Eigen::VectorXd y_train(n_train), y_val(n - n_train);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]);
        if (i < n_train) {
            u_train.col(i) = u_all.col(src);
            y_train(i) = y_all(src);
        } else {
            u_val.col(i - n_train) = u_all.col(src);
            y_val(i - n_train) = y_all(src);
        }
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    NetGrads m{Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols()),
               Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols()),
               Eigen::MatrixXd::Zero(net.w3.rows(), net.w3.cols()),
               Eigen::VectorXd::Zero(net.b1.size()), Eigen::VectorXd::Zero(net.b2.size()),
               Eigen::VectorXd::Zero(net.b3.size())};
    NetGrads v = m;
    long long t = 0;

    auto adam_step = [&](Eigen::MatrixXd& w, Eigen::MatrixXd& mw, Eigen::MatrixXd& vw,
                         const Eigen::MatrixXd& g) {
        mw = beta1 * mw + (1.0 - beta1) * g;
        vw = beta2 * vw + (1.0 - beta2) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        w.array() -= cfg.lr * (mw.array() / bc1) /
                     ((vw.array() / bc2).sqrt() + eps);
    };
    auto adam_step_vec = [&](Eigen::VectorXd& w, Eigen::VectorXd& mw, Eigen::VectorXd& vw,
                             const Eigen::VectorXd& g) {
        mw = beta1 * mw + (1.0 - beta1) * g;
        vw = beta2 * vw + (1.0 - beta2) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        w.array() -= cfg.lr * (mw.array() / bc1) /
                     ((vw.array() / bc2).sqrt() + eps);
    };

    LearningCurve curve;
    Eigen::MatrixXd u_batch(kPoseDims, cfg.batch);
    Eigen::VectorXd y_batch(cfg.batch);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(mix_seed(cfg.seed, 1, static_cast<std::uint64_t>(epoch)));
        const auto shuffle = epoch_rng.permutation(static_cast<std::size_t>(n_train));
        for (Eigen::Index start = 0; start < n_train; start += cfg.batch) {
            const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch, n_train - start);
            u_batch.resize(kPoseDims, bsz);
            y_batch.resize(bsz);
            for (Eigen::Index i = 0; i < bsz; ++i) {
                const auto src =
                    static_cast<Eigen::Index>(shuffle[static_cast<std::size_t>(start + i)]);
                u_batch.col(i) = u_train.col(src);
                y_batch(i) = y_train(src);
            }
            const NetGrads g = net_grad(net, u_batch, y_batch);
            ++t;
            adam_step(net.w1, m.w1, v.w1, g.w1);
            adam_step(net.w2, m.w2, v.w2, g.w2);
            adam_step(net.w3, m.w3, v.w3, g.w3);
            adam_step_vec(net.b1, m.b1, v.b1, g.b1);
            adam_step_vec(net.b2, m.b2, v.b2, g.b2);
            adam_step_vec(net.b3, m.b3, v.b3, g.b3);
        }
        const double tr = net_detail::batch_mse(net, u_train, y_train);
        const double va = net_detail::batch_mse(net, u_val, y_val);
        if (!std::isfinite(tr) || !std::isfinite(va))
            throw std::runtime_error("train_net: non-finite loss at epoch " +
                                     std::to_string(epoch + 1));
        curve.train_mse.push_back(tr);
        curve.val_mse.push_back(va);
    }
    return curve;
}

// Little-endian binary weights file: "DKW1", layer count, then per layer the
// dimensions followed by row-major weights and the bias vector.
inline void save_net(const DeepKernelNet& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write("DKW1", 4);
    const std::uint32_t layers = 3;
    f.write(reinterpret_cast<const char*>(&layers), sizeof(layers));
    auto put = [&f](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
        const std::uint32_t rows = static_cast<std::uint32_t>(w.rows());
        const std::uint32_t cols = static_cast<std::uint32_t>(w.cols());
        f.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
        f.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
        for (int i = 0; i < w.rows(); ++i)
            for (int j = 0; j < w.cols(); ++j) {
                const double v = w(i, j);
                f.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        for (int i = 0; i < b.size(); ++i) {
            const double v = b(i);
            f.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    };
    put(net.w1, net.b1);
    put(net.w2, net.b2);
    put(net.w3, net.b3);
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline DeepKernelNet load_net(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "DKW1", 4) != 0)
        throw std::runtime_error("bad weights file (magic mismatch): " + path);
    std::uint32_t layers = 0;
    f.read(reinterpret_cast<char*>(&layers), sizeof(layers));
    if (layers != 3) throw std::runtime_error("bad weights file (layer count): " + path);
    auto get = [&f, &path](Eigen::MatrixXd& w, Eigen::VectorXd& b, std::uint32_t er,
                           std::uint32_t ec) {
        std::uint32_t rows = 0, cols = 0;
        f.read(reinterpret_cast<char*>(&rows), sizeof(rows));
        f.read(reinterpret_cast<char*>(&cols), sizeof(cols));
        if (!f || rows != er || cols != ec)
            throw std::runtime_error("bad weights file (layer shape): " + path);
        w.resize(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i)
            for (std::uint32_t j = 0; j < cols; ++j) {
                double v = 0.0;
                f.read(reinterpret_cast<char*>(&v), sizeof(v));
                w(i, j) = v;
            }
        b.resize(rows);
        for (std::uint32_t i = 0; i < rows; ++i) {
            double v = 0.0;
            f.read(reinterpret_cast<char*>(&v), sizeof(v));
            b(i) = v;
        }
        if (!f) throw std::runtime_error("bad weights file (truncated): " + path);
    };
    DeepKernelNet net;
    get(net.w1, net.b1, kNetHidden1, kPoseDims);
    get(net.w2, net.b2, kNetHidden2, kNetHidden1);
    get(net.w3, net.b3, 1, kNetHidden2);
    return net;
}

}  // namespace dkbo
