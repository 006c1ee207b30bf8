#include "zsol/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include "zsol/align.hpp"
#include "zsol/config.hpp"
#include "zsol/detail/bytes.hpp"
#include "zsol/errors.hpp"
#include "zsol/locate.hpp"
#include "zsol/manifest.hpp"
#include "zsol/metrics.hpp"
#include "zsol/synthetic.hpp"
#include "zsol/tensor_io.hpp"
#include "zsol/tssm.hpp"

namespace zsol {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

unsigned resolve_threads(unsigned flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("ZSOL_THREADS"); env && *env) {
        char* end = nullptr;
        const unsigned long n = std::strtoul(env, &end, 10);
        if (*end != '\0' || n == 0) throw std::invalid_argument("ZSOL_THREADS must be a positive integer");
        return static_cast<unsigned>(n);
    }
    return 1;
}

struct GenDensityArgs {
    std::string points, out, norm = "mass";
    std::size_t height = 0, width = 0;
    double sigma = 0.0;
};

void cmd_gen_density(const GenDensityArgs& a, std::ostream& out) {
    KernelNorm norm;
    if (a.norm == "mass") norm = KernelNorm::unit_mass;
    else if (a.norm == "peak") norm = KernelNorm::unit_peak;
    else throw std::invalid_argument("--norm must be 'mass' or 'peak'");
    const PointSet pts = read_points(a.points);
    try {
        pts.validate(a.height, a.width);
    } catch (const std::invalid_argument& e) {
        throw DataError(a.points + ": " + e.what());
    }
    const DensityMap d = gaussian_splat(pts, a.height, a.width, a.sigma, norm);
    write_tensor(a.out, to_tensor(d.grid()));
    out << "points " << pts.size() << " mass " << fmt("%.6f", d.sum()) << "\n";
}

struct TrainArgs {
    std::string manifest, config, out, loss_csv;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& log) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    if (a.seed) cfg.train.seed = *a.seed;
    cfg.train.threads = resolve_threads(a.threads);

    const Manifest m = load_manifest(a.manifest);
    if (m.records.empty()) throw DataError(a.manifest + ": manifest has no samples");
    std::vector<TrainingSample> dataset;
    for (const auto& rec : m.records) {
        const LoadedSample s = load_sample(m, rec);
        auto windows = training_samples(s);
        std::move(windows.begin(), windows.end(), std::back_inserter(dataset));
    }
    const std::size_t d_img = dataset.front().patches.embeddings.dim();
    const std::size_t d_txt = dataset.front().text.size();
    for (const auto& s : dataset) {
        if (s.patches.embeddings.dim() != d_img || s.text.size() != d_txt) {
            throw DataError(a.manifest + ": samples disagree on embedding dimensions");
        }
    }
    ProjectionModel init = ProjectionModel::perturbed_identity(d_img, d_txt, cfg.init_noise, cfg.train.seed);
    init.temperature = cfg.temperature;

    log << "train: " << m.records.size() << " images, " << dataset.size() << " windows, epochs "
        << cfg.train.contrastive_epochs << "+" << cfg.train.mse_epochs << ", seed " << cfg.train.seed
        << "\n";
    const TrainResult r = train(std::move(init), dataset, cfg.train);
    write_checkpoint(a.out, r.model);
    if (!a.loss_csv.empty()) detail::write_file(a.loss_csv, loss_history_csv(r.history));
    if (!r.history.empty()) {
        const auto& last = r.history.back();
        out << "final epoch " << last.epoch << " (" << stage_name(last.stage) << ") loss "
            << fmt("%.6g", last.loss) << ", " << r.lr_trace.size() << " steps\n";
    }
}

struct LocalizeArgs {
    std::string manifest, checkpoint, out, regime = "dense";
    bool overlay = false;
    unsigned threads = 0;
};

void cmd_localize(const LocalizeArgs& a, std::ostream& out, std::ostream& log) {
    const DecodeConfig cfg = DecodeConfig::for_regime(parse_regime(a.regime));
    const unsigned threads = resolve_threads(a.threads);
    const ProjectionModel model = read_checkpoint(a.checkpoint);
    const Manifest m = load_manifest(a.manifest);
    log << "localize: regime " << a.regime << ", alpha = " << (a.regime == "dense" ? "5" : "10")
        << "/255 (" << fmt("%.6f", cfg.alpha) << "), beta = " << fmt("%g", cfg.beta) << "\n";

    fs::create_directories(a.out);
    std::string counts = "id,count\n";
    for (const auto& rec : m.records) {
        const LoadedSample s = load_sample(m, rec);
        if (s.windows.front().embeddings.dim() != model.d_img || s.text.self_support.size() != model.d_txt) {
            throw DataError("sample '" + rec.id + "': embedding dimensions do not match the checkpoint");
        }
        const Localization loc = localize(s.windows, s.plan, s.text, model, cfg, threads);
        write_points(fs::path(a.out) / (rec.id + ".zspt"), loc.points);
        if (a.overlay) write_tensor(fs::path(a.out) / (rec.id + ".density.zsol"), to_tensor(loc.density.grid()));
        counts += rec.id + "," + std::to_string(loc.count) + "\n";
    }
    detail::write_file(fs::path(a.out) / "counts.csv", counts);
    out << "localized " << m.records.size() << " images into " << a.out << "\n";
}

struct EvaluateArgs {
    std::string pred, gt, manifest, preset = "fsc147", out;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const ThresholdPreset& preset = preset_by_name(a.preset);
    std::vector<EvalSample> samples;
    auto read_pred = [&](const std::string& id) {
        const fs::path p = fs::path(a.pred) / (id + ".zspt");
        if (!fs::is_regular_file(p)) throw DataError("missing prediction file " + p.string());
        PointSet pred = read_points(p);
        if (!pred.has_confidences()) throw DataError(p.string() + ": predictions need confidences");
        return pred;
    };
    if (!a.manifest.empty()) {
        const Manifest m = load_manifest(a.manifest);
        for (const auto& rec : m.records) {
            const fs::path gt_path = a.gt.empty() ? m.root / rec.points : fs::path(a.gt) / (rec.id + ".zspt");
            samples.push_back({rec.id, read_pred(rec.id), read_points(gt_path), rec.category});
        }
    } else {
        if (!fs::is_directory(a.gt)) throw DataError("ground-truth directory not found: " + a.gt);
        std::vector<std::string> ids;
        for (const auto& e : fs::directory_iterator(a.gt)) {
            if (e.is_regular_file() && e.path().extension() == ".zspt") ids.push_back(e.path().stem().string());
        }
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            samples.push_back({id, read_pred(id), read_points(fs::path(a.gt) / (id + ".zspt")), std::nullopt});
        }
    }
    if (samples.empty()) throw DataError("no ground-truth point files to evaluate");
    const EvalReport r = evaluate(samples, preset);
    detail::write_file(a.out + ".summary.csv", report_summary_csv(r));
    detail::write_file(a.out + ".images.csv", report_images_csv(r));
    out << report_table(r);
}

struct InspectArgs {
    std::string tokens, token_embeddings, sentence, title;
    std::size_t dim = 64;
    std::uint64_t seed = 0;
};

void cmd_tssm_inspect(const InspectArgs& a, std::ostream& out) {
    TextBundle b;
    if (!a.title.empty()) {
        const HashEmbedder embedder(a.dim, a.seed);
        const TokenSequence seq = tokenize_prompt(HashTokenizer{}, a.title);
        b = build_text_bundle(seq, embedder.token_embeddings(seq), embedder.sentence_embedding(seq));
    } else {
        if (a.tokens.empty() || a.token_embeddings.empty() || a.sentence.empty()) {
            throw std::invalid_argument("give --title, or all of --tokens, --token-embeddings and --sentence");
        }
        const TokenSequence seq = read_tokens(a.tokens);
        EmbeddingMatrix tok = embeddings_from_tensor(read_tensor(a.token_embeddings));
        const EmbeddingMatrix sent = embeddings_from_tensor(read_tensor(a.sentence));
        if (tok.rows() != kContextLength || sent.rows() != 1 || sent.dim() != tok.dim()) {
            throw DataError("token embeddings must be 77 x D and the sentence embedding 1 x D");
        }
        b = build_text_bundle(seq, std::move(tok), sent.row_as_double(0));
    }
    double norm = 0.0;
    for (double v : b.self_support) norm += v * v;
    out << "W " << fmt("%.9f", b.weight) << "\n";
    out << "norm " << fmt("%.9f", std::sqrt(norm)) << "\n";
    out << "title_span " << b.title_span.start << " " << b.title_span.length << "\n";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"zsol: zero-shot object localization toolkit", "zsol"};
    app.require_subcommand(1);

    GenDensityArgs gd;
    auto* gen = app.add_subcommand("gen-density", "Render a ground-truth density tensor from a point file");
    gen->add_option("--points", gd.points, "Input point file (ZSPT)")->required();
    gen->add_option("--height", gd.height, "Map height")->required();
    gen->add_option("--width", gd.width, "Map width")->required();
    gen->add_option("--sigma", gd.sigma, "Gaussian sigma in pixels")->required();
    gen->add_option("--norm", gd.norm, "Kernel normalization: mass or peak");
    gen->add_option("--out", gd.out, "Output tensor file (ZSOL)")->required();

    TrainArgs tr;
    std::uint64_t seed = 0;
    auto* trn = app.add_subcommand("train", "Train the alignment head on a manifest");
    trn->add_option("--manifest", tr.manifest, "Training manifest")->required();
    trn->add_option("--config", tr.config, "key = value config file");
    trn->add_option("--out", tr.out, "Output checkpoint (ZSMD)")->required();
    trn->add_option("--loss-csv", tr.loss_csv, "Per-epoch loss CSV");
    auto* seed_opt = trn->add_option("--seed", seed, "Overrides the config seed");
    trn->add_option("--threads", tr.threads, "Worker threads (default: ZSOL_THREADS or 1)");

    LocalizeArgs lo;
    auto* loc = app.add_subcommand("localize", "Predict object points for every manifest image");
    loc->add_option("--manifest", lo.manifest, "Manifest to localize")->required();
    loc->add_option("--checkpoint", lo.checkpoint, "Trained checkpoint")->required();
    loc->add_option("--regime", lo.regime, "dense (alpha 5/255) or sparse (alpha 10/255)");
    loc->add_option("--out", lo.out, "Output directory")->required();
    loc->add_flag("--overlay", lo.overlay, "Also write the fused density map per image");
    loc->add_option("--threads", lo.threads, "Worker threads (default: ZSOL_THREADS or 1)");

    EvaluateArgs ev;
    auto* eva = app.add_subcommand("evaluate", "Score predicted points against ground truth");
    eva->add_option("--pred", ev.pred, "Directory of predicted <id>.zspt files")->required();
    eva->add_option("--gt", ev.gt, "Directory of ground-truth <id>.zspt files");
    eva->add_option("--manifest", ev.manifest, "Manifest supplying ids, categories and ground truth");
    eva->add_option("--preset", ev.preset, "fsc147, carpk, shtechA or shtechB");
    eva->add_option("--out", ev.out, "Output prefix for the CSV reports")->required();

    InspectArgs in;
    auto* ins = app.add_subcommand("tssm-inspect", "Print the TSSM weight, self-support norm and title span");
    ins->add_option("--title", in.title, "Title to run through the built-in mock text encoder");
    ins->add_option("--dim", in.dim, "Mock embedding width");
    ins->add_option("--seed", in.seed, "Mock embedder seed");
    ins->add_option("--tokens", in.tokens, "Token file (ZSTK)");
    ins->add_option("--token-embeddings", in.token_embeddings, "77 x D token embedding tensor");
    ins->add_option("--sentence", in.sentence, "Sentence embedding tensor");

    SyntheticSceneSpec sy;
    std::string synth_out, titles;
    std::size_t n_train = 20, n_test = 10;
    auto* syn = app.add_subcommand("synth", "Generate synthetic train/test scenes");
    syn->add_option("--out", synth_out, "Output directory")->required();
    syn->add_option("--train", n_train, "Training scenes");
    syn->add_option("--test", n_test, "Test scenes");
    syn->add_option("--seed", sy.seed, "Generator seed");
    syn->add_option("--snr", sy.snr, "Signal-to-noise ratio of object patches");
    syn->add_option("--dim", sy.dim, "Embedding width");
    syn->add_option("--height", sy.height, "Image height");
    syn->add_option("--width", sy.width, "Image width");
    syn->add_option("--patch-size", sy.patch_size, "Patch size in pixels");
    syn->add_option("--min-objects", sy.min_objects, "Fewest objects per scene");
    syn->add_option("--max-objects", sy.max_objects, "Most objects per scene");
    syn->add_option("--jitter", sy.jitter, "Max offset of an object from its patch centre");
    syn->add_option("--titles", titles, "Comma-separated object titles");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) {
            cmd_gen_density(gd, out);
        } else if (*trn) {
            if (*seed_opt) tr.seed = seed;
            cmd_train(tr, out, err);
        } else if (*loc) {
            cmd_localize(lo, out, err);
        } else if (*eva) {
            if (ev.gt.empty() && ev.manifest.empty()) {
                throw std::invalid_argument("evaluate needs --gt or --manifest");
            }
            cmd_evaluate(ev, out);
        } else if (*ins) {
            cmd_tssm_inspect(in, out);
        } else if (*syn) {
            if (!titles.empty()) sy.titles = split_list(titles);
            sy.splits = {{"train", n_train}, {"test", n_test}};
            for (const auto& p : gen_synthetic(sy, synth_out)) out << p.string() << "\n";
        }
    } catch (const NumericError& e) {
        err << "zsol: numerical error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        err << "zsol: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "zsol: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

}  // namespace zsol
