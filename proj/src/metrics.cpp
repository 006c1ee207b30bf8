#include "zsol/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace zsol {

namespace {

double distance(const Point& a, const Point& b) {
    const double dx = static_cast<double>(a.x) - b.x;
    const double dy = static_cast<double>(a.y) - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

void require_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("matching threshold sigma must be positive");
    }
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t rows,
                                             std::size_t cols) {
    if (rows > cols) throw std::invalid_argument("min_cost_assignment: rows must not exceed cols");
    if (cost.size() != rows * cols) throw std::invalid_argument("min_cost_assignment: bad matrix size");
    if (rows == 0) return {};

    // Shortest augmenting path with potentials; 1-based with a virtual column 0.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
    for (std::size_t i = 1; i <= rows; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> min_v(cols + 1, inf);
        std::vector<char> used(cols + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                if (cur < min_v[j]) {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if (min_v[j] < delta) {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(rows);
    for (std::size_t j = 1; j <= cols; ++j) {
        if (match[j] != 0) assignment[match[j] - 1] = j - 1;
    }
    return assignment;
}

double MatchResult::precision() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double MatchResult::recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

MatchResult match_points(const PointSet& pred, const PointSet& gt, double sigma) {
    require_sigma(sigma);
    MatchResult m;
    m.sigma = sigma;
    const std::size_t np = pred.size(), ng = gt.size();
    const bool pred_rows = np <= ng;
    const std::size_t rows = pred_rows ? np : ng;
    const std::size_t cols = pred_rows ? ng : np;
    std::vector<double> cost(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const Point& a = pred.points[pred_rows ? r : c];
            const Point& b = gt.points[pred_rows ? c : r];
            cost[r * cols + c] = distance(a, b);
        }
    }
    const auto assign = min_cost_assignment(cost, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double d = cost[r * cols + assign[r]];
        m.assignment_cost += d;
        if (d <= sigma) {
            const std::size_t p = pred_rows ? r : assign[r];
            const std::size_t g = pred_rows ? assign[r] : r;
            m.pairs.push_back({p, g, d});
        }
    }
    std::sort(m.pairs.begin(), m.pairs.end(),
              [](const MatchPair& a, const MatchPair& b) { return a.pred < b.pred; });
    m.tp = m.pairs.size();
    m.fp = np - m.tp;
    m.fn = ng - m.tp;
    return m;
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

double f1_score(const MatchResult& m) { return f1_score(m.precision(), m.recall()); }

double average_precision(std::span<const ImageDetections> images, double sigma) {
    require_sigma(sigma);
    struct Ranked {
        std::size_t image;
        std::size_t index;
        float confidence;
        Point point;
    };
    std::vector<Ranked> ranked;
    std::size_t total_gt = 0;
    for (std::size_t k = 0; k < images.size(); ++k) {
        const PointSet& pred = *images[k].pred;
        if (!pred.has_confidences() || pred.confidences->size() != pred.size()) {
            throw std::invalid_argument("average_precision: predictions need confidences");
        }
        total_gt += images[k].gt->size();
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ranked.push_back({k, i, (*pred.confidences)[i], pred.points[i]});
        }
    }
    if (total_gt == 0) return 0.0;
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.image != b.image) return a.image < b.image;
        if (a.point.y != b.point.y) return a.point.y < b.point.y;
        if (a.point.x != b.point.x) return a.point.x < b.point.x;
        return a.index < b.index;
    });

    std::vector<std::vector<char>> taken(images.size());
    for (std::size_t k = 0; k < images.size(); ++k) taken[k].assign(images[k].gt->size(), 0);

    // Cumulative true positives after each ranked prediction.
    std::vector<std::size_t> tp_at(ranked.size());
    std::size_t tp = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const auto& pr = ranked[r];
        const PointSet& gt = *images[pr.image].gt;
        std::size_t best = gt.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (taken[pr.image][g]) continue;
            const double d = distance(pr.point, gt.points[g]);
            if (d <= sigma && d < best_d) {
                best_d = d;
                best = g;
            }
        }
        if (best < gt.size()) {
            taken[pr.image][best] = 1;
            ++tp;
        }
        tp_at[r] = tp;
    }

    // P_interp(level / 100): best precision over ranks whose recall reaches the level.
    double sum = 0.0;
    for (std::size_t level = 0; level <= 100; ++level) {
        double best = 0.0;
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (tp_at[r] * 100 >= level * total_gt) {
                best = std::max(best, static_cast<double>(tp_at[r]) / static_cast<double>(r + 1));
            }
        }
        sum += best;
    }
    return sum / 101.0;
}

double average_precision(const PointSet& pred, const PointSet& gt, double sigma) {
    const ImageDetections one{&pred, &gt};
    return average_precision(std::span<const ImageDetections>(&one, 1), sigma);
}

double average_recall(std::span<const MatchResult> groups) {
    if (groups.empty()) throw std::invalid_argument("average_recall: no groups");
    double sum = 0.0;
    for (const auto& g : groups) sum += g.recall();
    return sum / static_cast<double>(groups.size());
}

CountingErrors counting_errors(std::span<const std::pair<std::size_t, std::size_t>> counts) {
    if (counts.empty()) throw std::invalid_argument("counting_errors: no images");
    double abs_sum = 0.0, sq_sum = 0.0;
    for (auto [pred, gt] : counts) {
        const double e = static_cast<double>(pred) - static_cast<double>(gt);
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const double n = static_cast<double>(counts.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

double sigma_from_image(double width, double height) {
    if (!(width > 0.0) || !(height > 0.0)) throw std::invalid_argument("image sides must be positive");
    return std::sqrt((width * width + height * height) / 2.0);
}

const std::vector<ThresholdPreset>& threshold_presets() {
    static const std::vector<ThresholdPreset> presets = {
        {"fsc147", 5.0, 10.0},
        {"carpk", 5.0, 10.0},
        {"shtechA", 4.0, 8.0},
        {"shtechB", 4.0, 8.0},
    };
    return presets;
}

const ThresholdPreset& preset_by_name(std::string_view name) {
    std::string valid;
    for (const auto& p : threshold_presets()) {
        if (p.name == name) return p;
        valid += (valid.empty() ? "" : ", ") + p.name;
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'; valid presets: " + valid);
}

EvalReport evaluate(std::span<const EvalSample> samples, const ThresholdPreset& preset) {
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
    EvalReport report;
    report.preset = preset.name;

    std::vector<std::pair<std::size_t, std::size_t>> counts;
    for (const auto& s : samples) {
        ImageEval ie;
        ie.id = s.id;
        ie.pred_count = s.pred.size();
        ie.gt_count = s.gt.size();
        ie.strict = match_points(s.pred, s.gt, preset.sigma_s);
        ie.loose = match_points(s.pred, s.gt, preset.sigma_l);
        report.images.push_back(std::move(ie));
        counts.emplace_back(s.pred.size(), s.gt.size());
    }
    report.counting = counting_errors(counts);

    const bool labelled = std::all_of(samples.begin(), samples.end(),
                                      [](const EvalSample& s) { return s.category.has_value(); });
    std::vector<ImageDetections> detections;
    for (const auto& s : samples) detections.push_back({&s.pred, &s.gt});

    auto summarize = [&](double sigma, MatchResult ImageEval::*which) {
        ThresholdMetrics t;
        t.sigma = sigma;
        std::vector<MatchResult> with_gt;
        std::map<std::string, MatchResult> per_category;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const MatchResult& m = report.images[i].*which;
            t.tp += m.tp;
            t.fp += m.fp;
            t.fn += m.fn;
            if (m.tp + m.fn > 0) with_gt.push_back(m);
            if (labelled) {
                auto& c = per_category[*samples[i].category];
                c.tp += m.tp;
                c.fp += m.fp;
                c.fn += m.fn;
            }
        }
        MatchResult pooled;
        pooled.tp = t.tp;
        pooled.fp = t.fp;
        pooled.fn = t.fn;
        t.precision = pooled.precision();
        t.recall = pooled.recall();
        t.f1 = f1_score(t.precision, t.recall);
        t.ap = average_precision(detections, sigma);
        t.ar = with_gt.empty() ? 0.0 : average_recall(with_gt);
        if (labelled) {
            std::vector<MatchResult> groups;
            for (auto& [name, m] : per_category) {
                if (m.tp + m.fn > 0) groups.push_back(m);
            }
            t.ar_category = groups.empty() ? 0.0 : average_recall(groups);
        }
        return t;
    };
    report.strict = summarize(preset.sigma_s, &ImageEval::strict);
    report.loose = summarize(preset.sigma_l, &ImageEval::loose);
    return report;
}

std::string report_summary_csv(const EvalReport& r) {
    std::string out =
        "preset,sigma_s,f1_s,ap_s,ar_s,precision_s,recall_s,ar_category_s,"
        "sigma_l,f1_l,ap_l,ar_l,precision_l,recall_l,ar_category_l,mae,mse,rmse\n";
    auto cat = [](const std::optional<double>& v) { return v ? fmt("%.9g", *v) : std::string(); };
    auto block = [&](const ThresholdMetrics& t) {
        return fmt("%.9g", t.sigma) + "," + fmt("%.9g", t.f1) + "," + fmt("%.9g", t.ap) + "," +
               fmt("%.9g", t.ar) + "," + fmt("%.9g", t.precision) + "," + fmt("%.9g", t.recall) +
               "," + cat(t.ar_category);
    };
    out += r.preset + "," + block(r.strict) + "," + block(r.loose) + "," +
           fmt("%.9g", r.counting.mae) + "," + fmt("%.9g", r.counting.rmse) + "," +
           fmt("%.9g", r.counting.rmse) + "\n";
    return out;
}

std::string report_images_csv(const EvalReport& r) {
    std::string out = "image,pred_count,gt_count,tp_s,fp_s,fn_s,tp_l,fp_l,fn_l\n";
    for (const auto& im : r.images) {
        out += im.id + "," + std::to_string(im.pred_count) + "," + std::to_string(im.gt_count) +
               "," + std::to_string(im.strict.tp) + "," + std::to_string(im.strict.fp) + "," +
               std::to_string(im.strict.fn) + "," + std::to_string(im.loose.tp) + "," +
               std::to_string(im.loose.fp) + "," + std::to_string(im.loose.fn) + "\n";
    }
    return out;
}

std::string report_table(const EvalReport& r) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "preset: %s\n", r.preset.c_str());
    out += line;
    const std::string hs = "Threshold=sigma_s(" + fmt("%g", r.strict.sigma) + ")";
    const std::string hl = "Threshold=sigma_l(" + fmt("%g", r.loose.sigma) + ")";
    std::snprintf(line, sizeof line, "%-24s %-24s %8s %8s\n", hs.c_str(), hl.c_str(), "", "");
    out += line;
    std::snprintf(line, sizeof line, "%8s%8s%8s %8s%8s%8s %8s %8s\n", "F1", "AP", "AR", "F1", "AP",
                  "AR", "MAE", "MSE");
    out += line;
    std::snprintf(line, sizeof line, "%8.2f%8.2f%8.2f %8.2f%8.2f%8.2f %8.2f %8.2f\n",
                  100.0 * r.strict.f1, 100.0 * r.strict.ap, 100.0 * r.strict.ar, 100.0 * r.loose.f1,
                  100.0 * r.loose.ap, 100.0 * r.loose.ar, r.counting.mae, r.counting.rmse);
    out += line;
    if (r.strict.ar_category) {
        std::snprintf(line, sizeof line, "per-category AR: %.2f (sigma_s) %.2f (sigma_l)\n",
                      100.0 * *r.strict.ar_category, 100.0 * r.loose.ar_category.value_or(0.0));
        out += line;
    }
    return out;
}

}  // namespace zsol
