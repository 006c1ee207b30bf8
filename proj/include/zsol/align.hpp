#pragma once

// Trainable patch -> text alignment head: a linear projection of frozen patch
// embeddings into the text space, cosine/temperature similarity maps, the
// contrastive and density-MSE objectives with analytic gradients, AdamW with
// a step-decay schedule, and the two-stage training loop.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zsol/grid.hpp"

namespace zsol {

/// z = W^T x + b with W stored row-major as d_img x d_txt.
struct ProjectionModel {
    std::size_t d_img = 0;
    std::size_t d_txt = 0;
    std::vector<double> weights;
    std::vector<double> bias;
    double temperature = 0.07;

    static ProjectionModel zeros(std::size_t d_img, std::size_t d_txt);
    /// Rectangular identity (W[i][i] = 1) with zero bias.
    static ProjectionModel identity(std::size_t d_img, std::size_t d_txt);
    /// Identity plus i.i.d. N(0, noise^2) on every weight; bias zero.
    static ProjectionModel perturbed_identity(std::size_t d_img, std::size_t d_txt, double noise,
                                              std::uint64_t seed);

    std::vector<double> project(std::span<const float> patch) const;
    void validate() const;

    friend bool operator==(const ProjectionModel&, const ProjectionModel&) = default;
};

struct ModelGradients {
    std::vector<double> weights;
    std::vector<double> bias;

    static ModelGradients zeros_like(const ProjectionModel& m);
    void add_scaled(const ModelGradients& other, double scale);
};

/// Patch embeddings laid out on a grid_h x grid_w lattice, row-major.
struct PatchGrid {
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    EmbeddingMatrix embeddings;

    PatchGrid() = default;
    PatchGrid(std::size_t h, std::size_t w, EmbeddingMatrix e);
    std::size_t count() const { return grid_h * grid_w; }
};

/// S(p) = cos(project(patch_p), text) / temperature on the patch grid.
Grid similarity_map(const ProjectionModel& model, const PatchGrid& patches,
                    std::span<const double> text);

/// clamp_0(bilinear_upsample(S, factor)) at pixel resolution.
DensityMap predicted_density(const ProjectionModel& model, const PatchGrid& patches,
                             std::span<const double> text, int factor);

struct PatchSplit {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
};

/// Patches whose ground-truth mass exceeds `threshold` are positives. The
/// density map must tile exactly into grid_h x grid_w blocks.
PatchSplit split_patches(const DensityMap& gt, std::size_t grid_h, std::size_t grid_w,
                         double threshold = 0.5);

struct LossResult {
    double loss = 0.0;
    ModelGradients grad;
};

/// InfoNCE over patches: mean over positives of
/// -log(exp(S_pos) / (exp(S_pos) + sum_neg exp(S_neg))).
LossResult contrastive_loss(const ProjectionModel& model, const PatchGrid& patches,
                            std::span<const double> text, std::span<const std::size_t> positives,
                            std::span<const std::size_t> negatives);

struct MseResult {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// mean((pred - gt)^2) and its gradient 2 (pred - gt) / n.
MseResult mse_loss(std::span<const double> pred, std::span<const double> gt);
MseResult mse_loss(const DensityMap& pred, const DensityMap& gt);

/// MSE between predicted_density(model, ...) and `target`, differentiated
/// through the clamp, the upsampling and the cosine head.
LossResult density_mse_loss(const ProjectionModel& model, const PatchGrid& patches,
                            std::span<const double> text, const DensityMap& target, int factor);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double decay_factor = 0.33;
    std::size_t decay_every = 100;

    void validate() const;
};

/// base * decay_factor^floor(step / decay_every); `step` counts completed updates.
double scheduled_lr(const AdamWConfig& cfg, std::size_t step);

/// One decoupled-weight-decay Adam update on a flat parameter block.
/// `t` is the 1-based step used for bias correction.
void adamw_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                  std::span<double> v, double lr, std::size_t t, const AdamWConfig& cfg);

struct OptimizerState {
    AdamWConfig config;
    std::size_t step = 0;
    std::vector<double> m_weights, v_weights, m_bias, v_bias;

    static OptimizerState for_model(const ProjectionModel& model, const AdamWConfig& cfg);
};

/// Applies one update and returns the learning rate it used. Throws
/// NumericError on a non-finite gradient, std::invalid_argument on a shape
/// mismatch.
double optimizer_step(ProjectionModel& model, OptimizerState& state, const ModelGradients& grad);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t contrastive_epochs = 20;
    std::size_t mse_epochs = 200;
    std::size_t batch_size = 3;
    AdamWConfig optimizer;
    double positive_threshold = 0.5;
    double gt_sigma = 2.0;
    /// Kernel used to render the stage-2 regression target.
    KernelNorm target_norm = KernelNorm::unit_peak;
    double target_sigma = 2.0;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const;
};

/// One window: its patch grid, the text self-support embedding and the
/// ground-truth points in window pixel coordinates.
struct TrainingSample {
    PatchGrid patches;
    std::vector<double> text;
    PointSet points;
    std::size_t height = 0;
    std::size_t width = 0;
};

enum class Stage { contrastive, mse };
std::string_view stage_name(Stage s);

struct EpochLoss {
    std::size_t epoch = 0;  ///< 1-based, counted across both stages
    Stage stage = Stage::contrastive;
    double loss = 0.0;      ///< mean over samples that contributed; NaN if none did
};

struct TrainResult {
    ProjectionModel model;
    std::vector<EpochLoss> history;
    std::vector<double> lr_trace;  ///< learning rate of every optimizer step
};

/// Stage 1 runs the contrastive objective, stage 2 the density MSE. Samples
/// are shuffled per epoch with a generator seeded from config.seed and
/// grouped into batches whose gradients are averaged. Deterministic for a
/// fixed seed regardless of config.threads.
TrainResult train(ProjectionModel model, std::span<const TrainingSample> dataset,
                  const TrainConfig& config);

/// CSV with header `epoch,stage,loss`.
std::string loss_history_csv(std::span<const EpochLoss> history);

/// Checkpoint: 'ZSMD' | 0x01 | d_img u32 | d_txt u32 | temperature f32 |
/// weights f32 row-major | bias f32 (all little-endian).
std::string encode_checkpoint(const ProjectionModel& model);
ProjectionModel decode_checkpoint(std::string_view bytes, const std::string& what = "checkpoint");
void write_checkpoint(const std::filesystem::path& path, const ProjectionModel& model);
ProjectionModel read_checkpoint(const std::filesystem::path& path);

}  // namespace zsol
