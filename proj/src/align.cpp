#include "zsol/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>

#include "zsol/errors.hpp"
#include "zsol/parallel.hpp"

namespace zsol {

namespace {

constexpr double kMinNorm = 1e-12;

// Cached forward pass of the cosine head for every patch.
struct HeadForward {
    std::vector<double> z;    // count x d_txt
    std::vector<double> cos;  // count
    std::vector<double> z_norm;
    double text_norm = 0.0;
};

HeadForward head_forward(const ProjectionModel& model, const PatchGrid& patches,
                         std::span<const double> text) {
    if (patches.embeddings.dim() != model.d_img) {
        throw std::invalid_argument("patch dimension " + std::to_string(patches.embeddings.dim()) +
                                    " does not match model input " + std::to_string(model.d_img));
    }
    if (text.size() != model.d_txt) {
        throw std::invalid_argument("text dimension " + std::to_string(text.size()) +
                                    " does not match model output " + std::to_string(model.d_txt));
    }
    const std::size_t n = patches.count();
    HeadForward f;
    f.z.resize(n * model.d_txt);
    f.cos.resize(n);
    f.z_norm.resize(n);
    double tt = 0.0;
    for (double t : text) tt += t * t;
    f.text_norm = std::sqrt(tt);
    for (std::size_t p = 0; p < n; ++p) {
        auto z = model.project(patches.embeddings.row(p));
        double zz = 0.0;
        for (double v : z) zz += v * v;
        f.z_norm[p] = std::sqrt(zz);
        f.cos[p] = cosine_similarity(std::span<const double>(z), text);
        std::copy(z.begin(), z.end(), f.z.begin() + static_cast<std::ptrdiff_t>(p * model.d_txt));
    }
    return f;
}

// Chains dL/dS per patch through S = cos / temperature into W and b.
ModelGradients head_backward(const ProjectionModel& model, const PatchGrid& patches,
                             std::span<const double> text, const HeadForward& f,
                             std::span<const double> d_score) {
    ModelGradients g = ModelGradients::zeros_like(model);
    const std::size_t dt = model.d_txt;
    if (f.text_norm < kMinNorm) return g;
    std::vector<double> dz(dt);
    for (std::size_t p = 0; p < patches.count(); ++p) {
        const double ds = d_score[p];
        const double zn = f.z_norm[p];
        if (ds == 0.0 || zn < kMinNorm) continue;
        const double* z = f.z.data() + p * dt;
        const double dc = ds / model.temperature;
        const double a = dc / (zn * f.text_norm);
        const double b = dc * f.cos[p] / (zn * zn);
        for (std::size_t j = 0; j < dt; ++j) dz[j] = a * text[j] - b * z[j];
        auto x = patches.embeddings.row(p);
        for (std::size_t i = 0; i < model.d_img; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            double* row = g.weights.data() + i * dt;
            for (std::size_t j = 0; j < dt; ++j) row[j] += xi * dz[j];
        }
        for (std::size_t j = 0; j < dt; ++j) g.bias[j] += dz[j];
    }
    return g;
}

std::vector<double> scores_from(const HeadForward& f, double temperature) {
    std::vector<double> s(f.cos.size());
    for (std::size_t p = 0; p < s.size(); ++p) s[p] = f.cos[p] / temperature;
    return s;
}

int upsample_factor(const PatchGrid& patches, std::size_t height, std::size_t width) {
    if (patches.grid_h == 0 || height % patches.grid_h != 0 || width % patches.grid_w != 0 ||
        height / patches.grid_h != width / patches.grid_w) {
        throw std::invalid_argument("window " + std::to_string(height) + "x" +
                                    std::to_string(width) + " is not an integer multiple of the " +
                                    std::to_string(patches.grid_h) + "x" +
                                    std::to_string(patches.grid_w) + " patch grid");
    }
    return static_cast<int>(height / patches.grid_h);
}

}  // namespace

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

ProjectionModel ProjectionModel::zeros(std::size_t d_img, std::size_t d_txt) {
    if (d_img == 0 || d_txt == 0) throw std::invalid_argument("model dimensions must be >= 1");
    ProjectionModel m;
    m.d_img = d_img;
    m.d_txt = d_txt;
    m.weights.assign(d_img * d_txt, 0.0);
    m.bias.assign(d_txt, 0.0);
    return m;
}

ProjectionModel ProjectionModel::identity(std::size_t d_img, std::size_t d_txt) {
    auto m = zeros(d_img, d_txt);
    for (std::size_t i = 0; i < std::min(d_img, d_txt); ++i) m.weights[i * d_txt + i] = 1.0;
    return m;
}

ProjectionModel ProjectionModel::perturbed_identity(std::size_t d_img, std::size_t d_txt,
                                                    double noise, std::uint64_t seed) {
    auto m = identity(d_img, d_txt);
    if (noise > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, noise);
        for (double& w : m.weights) w += normal(rng);
    }
    return m;
}

std::vector<double> ProjectionModel::project(std::span<const float> patch) const {
    if (patch.size() != d_img) throw std::invalid_argument("project: patch dimension mismatch");
    std::vector<double> z(bias);
    for (std::size_t i = 0; i < d_img; ++i) {
        const double xi = patch[i];
        if (xi == 0.0) continue;
        const double* row = weights.data() + i * d_txt;
        for (std::size_t j = 0; j < d_txt; ++j) z[j] += xi * row[j];
    }
    return z;
}

void ProjectionModel::validate() const {
    if (d_img == 0 || d_txt == 0) throw std::invalid_argument("model dimensions must be >= 1");
    if (weights.size() != d_img * d_txt || bias.size() != d_txt) {
        throw std::invalid_argument("model parameter shapes do not match dimensions");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("temperature must be positive and finite");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(weights.begin(), weights.end(), finite) ||
        !std::all_of(bias.begin(), bias.end(), finite)) {
        throw std::invalid_argument("model has non-finite parameters");
    }
}

ModelGradients ModelGradients::zeros_like(const ProjectionModel& m) {
    return {std::vector<double>(m.weights.size(), 0.0), std::vector<double>(m.bias.size(), 0.0)};
}

void ModelGradients::add_scaled(const ModelGradients& other, double scale) {
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += scale * other.weights[i];
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += scale * other.bias[i];
}

PatchGrid::PatchGrid(std::size_t h, std::size_t w, EmbeddingMatrix e)
    : grid_h(h), grid_w(w), embeddings(std::move(e)) {
    if (h == 0 || w == 0 || h * w != embeddings.rows()) {
        throw std::invalid_argument("patch grid " + std::to_string(h) + "x" + std::to_string(w) +
                                    " does not match " + std::to_string(embeddings.rows()) +
                                    " embedding rows");
    }
}

// ---------------------------------------------------------------------------
// Maps and losses
// ---------------------------------------------------------------------------

Grid similarity_map(const ProjectionModel& model, const PatchGrid& patches,
                    std::span<const double> text) {
    const auto f = head_forward(model, patches, text);
    const auto s = scores_from(f, model.temperature);
    return Grid(patches.grid_h, patches.grid_w, std::vector<float>(s.begin(), s.end()));
}

DensityMap predicted_density(const ProjectionModel& model, const PatchGrid& patches,
                             std::span<const double> text, int factor) {
    const auto f = head_forward(model, patches, text);
    const auto s = scores_from(f, model.temperature);
    const auto up = bilinear_upsample(s, patches.grid_h, patches.grid_w, factor);
    const auto k = static_cast<std::size_t>(factor);
    std::vector<float> values(up.size());
    for (std::size_t i = 0; i < up.size(); ++i) values[i] = static_cast<float>(std::max(up[i], 0.0));
    return DensityMap(Grid(patches.grid_h * k, patches.grid_w * k, std::move(values)));
}

PatchSplit split_patches(const DensityMap& gt, std::size_t grid_h, std::size_t grid_w,
                         double threshold) {
    if (grid_h == 0 || grid_w == 0 || gt.height() % grid_h != 0 || gt.width() % grid_w != 0) {
        throw std::invalid_argument("density map " + std::to_string(gt.height()) + "x" +
                                    std::to_string(gt.width()) + " does not tile into a " +
                                    std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                                    " patch grid");
    }
    const std::size_t bh = gt.height() / grid_h;
    const std::size_t bw = gt.width() / grid_w;
    PatchSplit split;
    for (std::size_t py = 0; py < grid_h; ++py) {
        for (std::size_t px = 0; px < grid_w; ++px) {
            double mass = 0.0;
            for (std::size_t y = py * bh; y < (py + 1) * bh; ++y) {
                for (std::size_t x = px * bw; x < (px + 1) * bw; ++x) mass += gt.at(y, x);
            }
            (mass > threshold ? split.positives : split.negatives).push_back(py * grid_w + px);
        }
    }
    return split;
}

LossResult contrastive_loss(const ProjectionModel& model, const PatchGrid& patches,
                            std::span<const double> text, std::span<const std::size_t> positives,
                            std::span<const std::size_t> negatives) {
    if (positives.empty()) throw std::invalid_argument("contrastive_loss: no positive patches");
    if (negatives.empty()) throw std::invalid_argument("contrastive_loss: no negative patches");
    for (auto idx : positives) {
        if (idx >= patches.count()) throw std::invalid_argument("positive index out of range");
    }
    for (auto idx : negatives) {
        if (idx >= patches.count()) throw std::invalid_argument("negative index out of range");
    }

    const auto f = head_forward(model, patches, text);
    const auto s = scores_from(f, model.temperature);

    // log sum_n exp(S_n), stabilised by its maximum.
    double neg_max = -std::numeric_limits<double>::infinity();
    for (auto n : negatives) neg_max = std::max(neg_max, s[n]);
    double neg_sum = 0.0;
    for (auto n : negatives) neg_sum += std::exp(s[n] - neg_max);
    const double neg_lse = neg_max + std::log(neg_sum);

    const double inv_pos = 1.0 / static_cast<double>(positives.size());
    std::vector<double> d_score(patches.count(), 0.0);
    double loss = 0.0;
    double neg_weight = 0.0;  // sum_p exp(-lse_p)
    for (auto p : positives) {
        const double hi = std::max(s[p], neg_lse);
        const double lse = hi + std::log(std::exp(s[p] - hi) + std::exp(neg_lse - hi));
        loss += lse - s[p];
        d_score[p] += inv_pos * (std::exp(s[p] - lse) - 1.0);
        neg_weight += std::exp(neg_lse - lse);
    }
    // dL/dS_n = (1/|P|) sum_p exp(S_n - lse_p) = softmax share of n among negatives
    // times the negatives' total share.
    for (auto n : negatives) {
        d_score[n] += inv_pos * neg_weight * std::exp(s[n] - neg_lse);
    }
    LossResult r;
    r.loss = loss * inv_pos;
    r.grad = head_backward(model, patches, text, f, d_score);
    return r;
}

MseResult mse_loss(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size() || pred.empty()) {
        throw std::invalid_argument("mse_loss: shape mismatch");
    }
    MseResult r;
    r.gradient.resize(pred.size());
    const double n = static_cast<double>(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        acc += d * d;
        r.gradient[i] = 2.0 * d / n;
    }
    r.loss = acc / n;
    return r;
}

MseResult mse_loss(const DensityMap& pred, const DensityMap& gt) {
    if (!pred.grid().same_shape(gt.grid())) {
        throw std::invalid_argument("mse_loss: density maps differ in shape");
    }
    std::vector<double> p(pred.values().begin(), pred.values().end());
    std::vector<double> g(gt.values().begin(), gt.values().end());
    return mse_loss(p, g);
}

LossResult density_mse_loss(const ProjectionModel& model, const PatchGrid& patches,
                            std::span<const double> text, const DensityMap& target, int factor) {
    const auto k = static_cast<std::size_t>(factor);
    if (target.height() != patches.grid_h * k || target.width() != patches.grid_w * k) {
        throw std::invalid_argument("density_mse_loss: target does not match upsampled grid");
    }
    const auto f = head_forward(model, patches, text);
    const auto s = scores_from(f, model.temperature);
    const auto up = bilinear_upsample(s, patches.grid_h, patches.grid_w, factor);
    std::vector<double> pred(up.size());
    for (std::size_t i = 0; i < up.size(); ++i) pred[i] = std::max(up[i], 0.0);
    std::vector<double> gt(target.values().begin(), target.values().end());
    auto mse = mse_loss(pred, gt);
    for (std::size_t i = 0; i < up.size(); ++i) {
        if (!(up[i] > 0.0)) mse.gradient[i] = 0.0;
    }
    const auto d_score = bilinear_upsample_adjoint(mse.gradient, patches.grid_h, patches.grid_w, factor);
    LossResult r;
    r.loss = mse.loss;
    r.grad = head_backward(model, patches, text, f, d_score);
    return r;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
        throw std::invalid_argument("lr decay factor must lie in (0, 1]");
    }
    if (decay_every == 0) throw std::invalid_argument("lr decay interval must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0) || weight_decay < 0.0) {
        throw std::invalid_argument("eps must be positive and weight decay non-negative");
    }
}

double scheduled_lr(const AdamWConfig& cfg, std::size_t step) {
    return cfg.lr * std::pow(cfg.decay_factor, static_cast<double>(step / cfg.decay_every));
}

void adamw_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                  std::span<double> v, double lr, std::size_t t, const AdamWConfig& cfg) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
        throw std::invalid_argument("adamw_update: shape mismatch");
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] *= 1.0 - lr * cfg.weight_decay;
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

OptimizerState OptimizerState::for_model(const ProjectionModel& model, const AdamWConfig& cfg) {
    cfg.validate();
    OptimizerState s;
    s.config = cfg;
    s.m_weights.assign(model.weights.size(), 0.0);
    s.v_weights.assign(model.weights.size(), 0.0);
    s.m_bias.assign(model.bias.size(), 0.0);
    s.v_bias.assign(model.bias.size(), 0.0);
    return s;
}

double optimizer_step(ProjectionModel& model, OptimizerState& state, const ModelGradients& grad) {
    if (grad.weights.size() != model.weights.size() || grad.bias.size() != model.bias.size() ||
        state.m_weights.size() != model.weights.size() || state.m_bias.size() != model.bias.size()) {
        throw std::invalid_argument("optimizer_step: gradient/state shape does not match model");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(grad.weights.begin(), grad.weights.end(), finite) ||
        !std::all_of(grad.bias.begin(), grad.bias.end(), finite)) {
        throw NumericError("non-finite gradient at optimizer step " + std::to_string(state.step));
    }
    const double lr = scheduled_lr(state.config, state.step);
    ++state.step;
    adamw_update(model.weights, grad.weights, state.m_weights, state.v_weights, lr, state.step,
                 state.config);
    adamw_update(model.bias, grad.bias, state.m_bias, state.v_bias, lr, state.step, state.config);
    return lr;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    optimizer.validate();
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (!(gt_sigma > 0.0) || !(target_sigma > 0.0)) throw std::invalid_argument("sigmas must be positive");
    if (!(positive_threshold >= 0.0)) throw std::invalid_argument("positive threshold must be >= 0");
}

std::string_view stage_name(Stage s) { return s == Stage::contrastive ? "contrastive" : "mse"; }

namespace {

struct PreparedSample {
    const TrainingSample* sample = nullptr;
    int factor = 1;
    PatchSplit split;
    DensityMap target;
};

}  // namespace

TrainResult train(ProjectionModel model, std::span<const TrainingSample> dataset,
                  const TrainConfig& config) {
    config.validate();
    model.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

    std::vector<PreparedSample> prepared(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset[i];
        auto& p = prepared[i];
        p.sample = &s;
        p.factor = upsample_factor(s.patches, s.height, s.width);
        const auto gt = gaussian_splat(s.points, s.height, s.width, config.gt_sigma);
        p.split = split_patches(gt, s.patches.grid_h, s.patches.grid_w, config.positive_threshold);
        p.target = gaussian_splat(s.points, s.height, s.width, config.target_sigma, config.target_norm);
    }

    TrainResult result;
    OptimizerState state = OptimizerState::for_model(model, config.optimizer);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(dataset.size());
    std::size_t epoch = 0;

    auto run_stage = [&](Stage stage, std::size_t epochs) {
        for (std::size_t e = 0; e < epochs; ++e) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            double loss_sum = 0.0;
            std::size_t loss_count = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t end = std::min(order.size(), start + config.batch_size);
                std::vector<std::optional<LossResult>> slots(end - start);
                parallel_for(slots.size(), config.threads, [&](std::size_t k) {
                    const auto& p = prepared[order[start + k]];
                    const auto& s = *p.sample;
                    if (stage == Stage::contrastive) {
                        if (p.split.positives.empty() || p.split.negatives.empty()) return;
                        slots[k] = contrastive_loss(model, s.patches, s.text, p.split.positives,
                                                    p.split.negatives);
                    } else {
                        slots[k] = density_mse_loss(model, s.patches, s.text, p.target, p.factor);
                    }
                });
                ModelGradients batch = ModelGradients::zeros_like(model);
                std::size_t used = 0;
                for (const auto& slot : slots) {
                    if (!slot) continue;
                    batch.add_scaled(slot->grad, 1.0);
                    loss_sum += slot->loss;
                    ++used;
                    ++loss_count;
                }
                if (used == 0) continue;
                for (double& g : batch.weights) g /= static_cast<double>(used);
                for (double& g : batch.bias) g /= static_cast<double>(used);
                result.lr_trace.push_back(optimizer_step(model, state, batch));
            }
            ++epoch;
            const double mean = loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                               : std::numeric_limits<double>::quiet_NaN();
            result.history.push_back({epoch, stage, mean});
        }
    };

    run_stage(Stage::contrastive, config.contrastive_epochs);
    run_stage(Stage::mse, config.mse_epochs);
    result.model = std::move(model);
    return result;
}

std::string loss_history_csv(std::span<const EpochLoss> history) {
    std::string out = "epoch,stage,loss\n";
    char buf[64];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof buf, "%.9g", h.loss);
        out += std::to_string(h.epoch) + "," + std::string(stage_name(h.stage)) + "," + buf + "\n";
    }
    return out;
}

}  // namespace zsol
