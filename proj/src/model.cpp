#include "oosenc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace oosenc {

std::string to_string(LossKind loss) {
    return loss == LossKind::cross_entropy ? "cross_entropy" : "mse";
}

LossKind parse_loss_kind(const std::string& s) {
    if (s == "cross_entropy") return LossKind::cross_entropy;
    if (s == "mse") return LossKind::mse;
    throw FormatError("unknown loss tag '" + s + "'");
}

void NetworkConfig::validate() const {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
        throw std::invalid_argument("network dimensions must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout_rate must be in [0,1)");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
}

bool Parameters::all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

LikelihoodModel::LikelihoodModel(Parameters params, NetworkConfig config, std::vector<double> loss_history)
    : params_(std::move(params)), config_(std::move(config)), loss_history_(std::move(loss_history)) {
    if (params_.b1.size() != params_.w1.rows() || params_.w2.cols() != params_.w1.rows() ||
        params_.b2.size() != params_.w2.rows())
        throw std::invalid_argument("inconsistent parameter shapes");
    if (!params_.all_finite()) throw DivergenceError("model parameters are not finite");
    config_.input_dim = static_cast<std::size_t>(params_.w1.cols());
    config_.hidden_dim = static_cast<std::size_t>(params_.w1.rows());
    config_.output_dim = static_cast<std::size_t>(params_.w2.rows());
}

Parameters init_parameters(const NetworkConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const auto n = static_cast<Eigen::Index>(config.input_dim);
    const auto h = static_cast<Eigen::Index>(config.hidden_dim);
    const auto p = static_cast<Eigen::Index>(config.output_dim);
    auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols) {
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
        return m;
    };
    Parameters out;
    out.w1 = glorot(h, n);
    out.b1 = Eigen::VectorXd::Zero(h);
    out.w2 = glorot(p, h);
    out.b2 = Eigen::VectorXd::Zero(p);
    return out;
}

LossAndGradients loss_and_gradients(const Parameters& params, const Eigen::MatrixXd& inputs,
                                    const std::vector<std::size_t>& labels, const Eigen::MatrixXd& targets,
                                    LossKind loss, const Eigen::MatrixXd* dropout_mask) {
    const Eigen::Index batch = inputs.cols();
    if (batch == 0) throw std::invalid_argument("empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch);

    Eigen::MatrixXd a1 = params.w1 * inputs;
    a1.colwise() += params.b1;
    Eigen::MatrixXd hidden = a1.cwiseMax(0.0);
    if (dropout_mask) hidden = hidden.cwiseProduct(*dropout_mask);
    Eigen::MatrixXd a2 = params.w2 * hidden;
    a2.colwise() += params.b2;

    LossAndGradients out;
    Eigen::MatrixXd d_a2(a2.rows(), batch);
    if (loss == LossKind::cross_entropy) {
        if (labels.size() != static_cast<std::size_t>(batch)) throw std::invalid_argument("label count mismatch");
        double total = 0.0;
        for (Eigen::Index j = 0; j < batch; ++j) {
            const std::size_t y = labels[static_cast<std::size_t>(j)];
            if (y >= static_cast<std::size_t>(a2.rows())) throw std::invalid_argument("label out of range");
            const double m = a2.col(j).maxCoeff();
            Eigen::VectorXd e = (a2.col(j).array() - m).exp().matrix();
            const double sum = e.sum();
            total += -(a2(static_cast<Eigen::Index>(y), j) - m - std::log(sum));
            d_a2.col(j) = e / sum;
            d_a2(static_cast<Eigen::Index>(y), j) -= 1.0;
        }
        out.loss = total * inv_b;
        d_a2 *= inv_b;
    } else {
        if (targets.rows() != a2.rows() || targets.cols() != batch)
            throw std::invalid_argument("target matrix shape mismatch");
        const Eigen::MatrixXd z = a2.array().tanh().matrix();
        const Eigen::MatrixXd diff = z - targets;
        const double scale = inv_b / static_cast<double>(a2.rows());
        out.loss = diff.squaredNorm() * scale;
        d_a2 = (2.0 * scale) * diff.cwiseProduct((1.0 - z.array().square()).matrix());
    }

    out.grad.w2 = d_a2 * hidden.transpose();
    out.grad.b2 = d_a2.rowwise().sum();
    Eigen::MatrixXd d_hidden = params.w2.transpose() * d_a2;
    if (dropout_mask) d_hidden = d_hidden.cwiseProduct(*dropout_mask);
    Eigen::MatrixXd d_a1 = (a1.array() > 0.0).select(d_hidden, 0.0);
    out.grad.w1 = d_a1 * inputs.transpose();
    out.grad.b1 = d_a1.rowwise().sum();
    return out;
}

namespace {

Parameters zeros_like(const Parameters& p) {
    return {Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols()), Eigen::VectorXd::Zero(p.b1.size()),
            Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols()), Eigen::VectorXd::Zero(p.b2.size())};
}

template <typename T>
void adam_step(T& param, const T& grad, T& m, T& v, double lr, double bc1, double bc2) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

Trainer::Trainer(Parameters init, NetworkConfig config, ClassEncodingSet targets)
    : params_(std::move(init)),
      config_(std::move(config)),
      targets_(std::move(targets)),
      m_(zeros_like(params_)),
      v_(zeros_like(params_)),
      rng_(derive_seed(config_.seed, 0x7261696e)) {
    config_.validate();
    check_targets(targets_);
}

void Trainer::check_targets(const ClassEncodingSet& targets) const {
    if (targets.dim() != static_cast<std::size_t>(params_.w2.rows()))
        throw std::invalid_argument("target dimension differs from network output dimension");
    if (config_.loss == LossKind::cross_entropy && targets.family() != EncodingFamily::one_hot)
        throw std::invalid_argument("cross-entropy training requires one-hot targets");
}

void Trainer::set_targets(ClassEncodingSet targets) {
    check_targets(targets);
    targets_ = std::move(targets);
}

double Trainer::run_epoch(const std::vector<EmbeddedSample>& data) {
    if (data.empty()) throw std::invalid_argument("empty training data");
    const auto n = params_.w1.cols();
    const auto h = params_.w1.rows();
    const auto p = params_.w2.rows();
    const std::size_t c = targets_.num_classes();
    for (const auto& s : data) {
        if (s.is_oos()) throw std::invalid_argument("out-of-scope sample in training data");
        if (s.label >= c) throw std::invalid_argument("training label out of range");
        if (static_cast<Eigen::Index>(s.embedding.size()) != n)
            throw std::invalid_argument("embedding dimension differs from network input");
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);

    const double keep = 1.0 - config_.dropout_rate;
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        const auto b = static_cast<Eigen::Index>(end - start);
        Eigen::MatrixXd x(n, b);
        Eigen::MatrixXd t(p, b);
        std::vector<std::size_t> labels(static_cast<std::size_t>(b));
        for (Eigen::Index j = 0; j < b; ++j) {
            const EmbeddedSample& s = data[order[start + static_cast<std::size_t>(j)]];
            x.col(j) = Eigen::Map<const Eigen::VectorXd>(s.embedding.data(), n);
            t.col(j) = Eigen::Map<const Eigen::VectorXd>(targets_[s.label].data(), p);
            labels[static_cast<std::size_t>(j)] = s.label;
        }
        Eigen::MatrixXd mask;
        const Eigen::MatrixXd* mask_ptr = nullptr;
        if (config_.dropout_rate > 0.0) {
            mask.resize(h, b);
            for (Eigen::Index j = 0; j < b; ++j)
                for (Eigen::Index i = 0; i < h; ++i) mask(i, j) = rng_.uniform01() < keep ? 1.0 / keep : 0.0;
            mask_ptr = &mask;
        }
        LossAndGradients lg = loss_and_gradients(params_, x, labels, t, config_.loss, mask_ptr);
        if (!std::isfinite(lg.loss)) throw DivergenceError("non-finite training loss");
        ++step_;
        const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(step_));
        const double lr = config_.learning_rate;
        adam_step(params_.w1, lg.grad.w1, m_.w1, v_.w1, lr, bc1, bc2);
        adam_step(params_.b1, lg.grad.b1, m_.b1, v_.b1, lr, bc1, bc2);
        adam_step(params_.w2, lg.grad.w2, m_.w2, v_.w2, lr, bc1, bc2);
        adam_step(params_.b2, lg.grad.b2, m_.b2, v_.b2, lr, bc1, bc2);
        total += lg.loss * static_cast<double>(b);
    }
    const double mean = total / static_cast<double>(data.size());
    if (!std::isfinite(mean) || !params_.all_finite()) throw DivergenceError("training diverged");
    history_.push_back(mean);
    return mean;
}

LikelihoodModel Trainer::model() const { return LikelihoodModel(params_, config_, history_); }

LikelihoodModel train_classifier(const std::vector<EmbeddedSample>& data, const ClassEncodingSet& targets,
                                 const NetworkConfig& config) {
    if (data.empty()) throw std::invalid_argument("empty training data");
    if (config.output_dim != targets.dim())
        throw std::invalid_argument("config.output_dim differs from encoding dimension");
    Trainer trainer(init_parameters(config), config, targets);
    for (std::size_t e = 0; e < config.epochs; ++e) trainer.run_epoch(data);
    return trainer.model();
}

LikelihoodVector predict(const LikelihoodModel& model, std::span<const double> embedding) {
    const Parameters& p = model.params();
    if (static_cast<Eigen::Index>(embedding.size()) != p.w1.cols())
        throw std::invalid_argument("embedding dimension " + std::to_string(embedding.size()) +
                                    " differs from model input " + std::to_string(p.w1.cols()));
    const Eigen::Map<const Eigen::VectorXd> x(embedding.data(), p.w1.cols());
    const Eigen::VectorXd hidden = (p.w1 * x + p.b1).cwiseMax(0.0);
    const Eigen::VectorXd z = (p.w2 * hidden + p.b2).array().tanh().matrix();
    return LikelihoodVector(Vector(z.data(), z.data() + z.size()));
}

std::vector<LikelihoodVector> predict_batch(const LikelihoodModel& model, const std::vector<Vector>& embeddings) {
    std::vector<LikelihoodVector> out;
    if (embeddings.empty()) return out;
    const Parameters& p = model.params();
    const auto n = p.w1.cols();
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(embeddings.size()));
    for (std::size_t j = 0; j < embeddings.size(); ++j) {
        if (static_cast<Eigen::Index>(embeddings[j].size()) != n)
            throw std::invalid_argument("embedding dimension differs from model input");
        x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(embeddings[j].data(), n);
    }
    Eigen::MatrixXd hidden = p.w1 * x;
    hidden.colwise() += p.b1;
    hidden = hidden.cwiseMax(0.0);
    Eigen::MatrixXd z = p.w2 * hidden;
    z.colwise() += p.b2;
    z = z.array().tanh().matrix();
    out.reserve(embeddings.size());
    for (Eigen::Index j = 0; j < z.cols(); ++j) out.emplace_back(Vector(z.col(j).data(), z.col(j).data() + z.rows()));
    return out;
}

namespace {

void write_matrix(std::string& out, const std::string& name, const Eigen::MatrixXd& m) {
    out += name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ' ';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
}

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    std::string tag;
    Eigen::Index r = 0, c = 0;
    if (!(in >> tag >> r >> c) || tag != name || r != rows || c != cols)
        throw FormatError("model checkpoint: bad section header for " + name);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            std::string tok;
            if (!(in >> tok)) throw FormatError("model checkpoint: truncated section " + name);
            try {
                m(i, j) = std::stod(tok);
            } catch (const std::exception&) {
                throw FormatError("model checkpoint: bad number '" + tok + "' in " + name);
            }
        }
    return m;
}

}  // namespace

std::string serialize_model(const LikelihoodModel& model) {
    const Parameters& p = model.params();
    std::string out = std::to_string(model.input_dim()) + " " + std::to_string(model.hidden_dim()) + " " +
                      std::to_string(model.output_dim()) + "\n";
    out += "loss " + to_string(model.config().loss) + "\n";
    write_matrix(out, "W1", p.w1);
    write_matrix(out, "b1", p.b1);
    write_matrix(out, "W2", p.w2);
    write_matrix(out, "b2", p.b2);
    return out;
}

LikelihoodModel parse_model(const std::string& text) {
    std::istringstream in(text);
    Eigen::Index n = 0, h = 0, p = 0;
    if (!(in >> n >> h >> p) || n < 1 || h < 1 || p < 1) throw FormatError("model checkpoint: bad 'n h p' header");
    std::string tag, loss;
    if (!(in >> tag >> loss) || tag != "loss") throw FormatError("model checkpoint: missing loss tag");
    NetworkConfig cfg;
    cfg.loss = parse_loss_kind(loss);
    Parameters params;
    params.w1 = read_matrix(in, "W1", h, n);
    params.b1 = read_matrix(in, "b1", h, 1);
    params.w2 = read_matrix(in, "W2", p, h);
    params.b2 = read_matrix(in, "b2", p, 1);
    return LikelihoodModel(std::move(params), cfg);
}

void save_model(const LikelihoodModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write model checkpoint " + path.string());
    out << serialize_model(model);
}

LikelihoodModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open model checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

}  // namespace oosenc
