#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "bmt/csv.hpp"
#include "bmt/errors.hpp"
#include "bmt/gbdt.hpp"
#include "bmt/parallel.hpp"
#include "bmt/rng.hpp"
#include "bmt/tgat.hpp"

namespace bmt {

namespace {

GatParams init_params(int input_dim, int hidden, double scale, uint64_t seed) {
    Rng rng(seed);
    GatParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.w.resize(static_cast<std::size_t>(hidden) * input_dim);
    for (double& v : p.w) v = rng.uniform(-scale, scale);
    p.attn.resize(2 * static_cast<std::size_t>(hidden) + 1);
    for (double& v : p.attn) v = rng.uniform(-scale, scale);
    p.head_w.resize(hidden);
    for (double& v : p.head_w) v = rng.uniform(-scale, scale);
    p.head_b = 0.0;
    return p;
}

double pairwise_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    // Small n; the evaluation module owns the real implementation.
    double u = 0.0;
    long long n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        ++n_pos;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] == 1) continue;
            if (scores[i] > scores[j]) u += 1.0;
            else if (scores[i] == scores[j]) u += 0.5;
        }
    }
    for (int y : labels) n_neg += y == 0 ? 1 : 0;
    if (n_pos == 0 || n_neg == 0) return -1.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

TrainedGat gat_train(const std::vector<TemporalGraph>& graphs, const TrainConfig& cfg) {
    if (graphs.empty()) throw ValidationError("tgat", "no training graphs");
    {
        bool has_pos = false, has_neg = false;
        for (const auto& g : graphs) (g.label == 1 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg)
            throw ValidationError("tgat", "both classes must be present in the training set");
    }
    const int input_dim = static_cast<int>(graphs[0].nodes.at(0).features.size());

    // Stratified validation split.
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < graphs.size(); ++i)
        (graphs[i].label == 1 ? pos : neg).push_back(i);
    Rng split_rng(derive_seed(cfg.seed, "gat-val-split"));
    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[split_rng.uniform_int(i)]);
    };
    shuffle(pos);
    shuffle(neg);
    const std::size_t val_pos = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(pos.size())));
    const std::size_t val_neg = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(neg.size())));
    std::vector<std::size_t> val_idx(pos.begin(), pos.begin() + val_pos);
    val_idx.insert(val_idx.end(), neg.begin(), neg.begin() + val_neg);
    std::vector<std::size_t> train_idx(pos.begin() + val_pos, pos.end());
    train_idx.insert(train_idx.end(), neg.begin() + val_neg, neg.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    if (train_idx.empty()) throw ValidationError("tgat", "training split is empty");

    // Class-balanced weights from the fitting subset.
    std::vector<int> train_labels;
    for (std::size_t i : train_idx) train_labels.push_back(graphs[i].label);
    const std::vector<double> balanced = class_weights(train_labels);
    double w_pos = 1.0, w_neg = 1.0;
    for (std::size_t i = 0; i < train_labels.size(); ++i)
        (train_labels[i] == 1 ? w_pos : w_neg) = balanced[i];
    auto weight_of = [&](int label) { return label == 1 ? w_pos : w_neg; };

    GatParams params = init_params(input_dim, cfg.hidden, cfg.init_scale,
                                   derive_seed(cfg.seed, "gat-init"));
    std::vector<double> flat = params.flat();
    std::vector<double> m(flat.size(), 0.0), v(flat.size(), 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    Rng crop_rng(derive_seed(cfg.seed, "gat-crops"));
    Rng batch_rng(derive_seed(cfg.seed, "gat-batches"));

    TrainedGat result;
    result.mode = cfg.mode;
    result.horizon = cfg.mode == GatMode::general ? 5 : cfg.horizon;

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_flat = flat;
    int bad_epochs = 0;
    int adam_t = 0;

    const std::size_t n_train = train_idx.size();
    const std::size_t batch =
        cfg.batch_size <= 0 ? n_train
                            : std::min<std::size_t>(n_train, static_cast<std::size_t>(cfg.batch_size));
    std::vector<std::vector<double>> grad_slots(batch);
    std::vector<double> loss_slots(batch);
    std::vector<int> horizons(n_train);
    std::vector<std::size_t> perm(n_train);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<double> grad(flat.size());

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const int t_in_period = epoch % cfg.restart_period;
        const double lr = cfg.lr0 *
                          (1.0 + std::cos(M_PI * static_cast<double>(t_in_period) /
                                          static_cast<double>(cfg.restart_period))) /
                          2.0;

        // Horizon draws happen up front in sample order, so the RNG stream is
        // independent of batch composition and worker scheduling.
        for (std::size_t s = 0; s < n_train; ++s) {
            const int available = graphs[train_idx[s]].horizon;
            if (cfg.mode == GatMode::general)
                horizons[s] = static_cast<int>(crop_rng.uniform_int(
                    static_cast<uint64_t>(std::min(5, available)) + 1));
            else
                horizons[s] = std::min(cfg.horizon, available);
        }
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(perm[i - 1], perm[batch_rng.uniform_int(i)]);

        double train_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += batch) {
            const std::size_t count = std::min(batch, n_train - start);
            const GatParams cur = GatParams::from_flat(flat, input_dim, cfg.hidden,
                                                       params.leaky_slope);
            parallel_for(count, [&](std::size_t b) {
                const std::size_t s = perm[start + b];
                const TemporalGraph cropped = crop_graph(graphs[train_idx[s]], horizons[s]);
                double loss = 0.0;
                grad_slots[b] = gat_backward(cur, cropped, cropped.label,
                                             weight_of(cropped.label), &loss);
                loss_slots[b] = loss;
            });

            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = 0; b < count; ++b) {
                for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += grad_slots[b][k];
                train_loss += loss_slots[b];
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (double& gk : grad) gk *= inv;

            ++adam_t;
            const double bc1 = 1.0 - std::pow(beta1, adam_t);
            const double bc2 = 1.0 - std::pow(beta2, adam_t);
            for (std::size_t k = 0; k < flat.size(); ++k) {
                m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                flat[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
            }
        }
        train_loss /= static_cast<double>(n_train);

        // Validation: time_specific at its horizon; general averaged over all
        // horizons (AUC reported at the full horizon).
        const GatParams stepped = GatParams::from_flat(flat, input_dim, cfg.hidden,
                                                       params.leaky_slope);
        double val_loss = 0.0;
        std::size_t val_terms = 0;
        std::vector<int> val_labels;
        std::vector<double> val_scores;
        for (std::size_t i : val_idx) {
            const int available = graphs[i].horizon;
            if (cfg.mode == GatMode::general) {
                for (int N = 0; N <= std::min(5, available); ++N) {
                    const TemporalGraph cropped = crop_graph(graphs[i], N);
                    const GatForward f = gat_forward(stepped, cropped);
                    const double y = static_cast<double>(cropped.label);
                    val_loss -= weight_of(cropped.label) *
                                (y * std::log(std::max(f.probability, 1e-300)) +
                                 (1.0 - y) * std::log(std::max(1.0 - f.probability, 1e-300)));
                    ++val_terms;
                    if (N == std::min(5, available)) {
                        val_labels.push_back(cropped.label);
                        val_scores.push_back(f.probability);
                    }
                }
            } else {
                const TemporalGraph cropped =
                    crop_graph(graphs[i], std::min(cfg.horizon, available));
                const GatForward f = gat_forward(stepped, cropped);
                const double y = static_cast<double>(cropped.label);
                val_loss -= weight_of(cropped.label) *
                            (y * std::log(std::max(f.probability, 1e-300)) +
                             (1.0 - y) * std::log(std::max(1.0 - f.probability, 1e-300)));
                ++val_terms;
                val_labels.push_back(cropped.label);
                val_scores.push_back(f.probability);
            }
        }
        val_loss /= static_cast<double>(val_terms);

        result.log.push_back(TrainLogEntry{epoch, lr, train_loss, val_loss,
                                           pairwise_auc(val_labels, val_scores)});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_flat = flat;
            result.best_epoch = epoch;
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            break;
        }
    }

    result.params = GatParams::from_flat(best_flat, input_dim, cfg.hidden, params.leaky_slope);
    return result;
}

std::vector<double> gat_predict(const TrainedGat& model, const std::vector<TemporalGraph>& graphs,
                                int horizon) {
    if (model.mode == GatMode::time_specific && horizon != model.horizon)
        throw ValidationError("tgat",
                              "time-specific model serves only its trained horizon",
                              "requested " + std::to_string(horizon) + ", trained " +
                                  std::to_string(model.horizon));
    std::vector<double> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) {
        const TemporalGraph cropped = crop_graph(g, horizon);
        out.push_back(gat_forward(model.params, cropped).probability);
    }
    return out;
}

void write_gat_json(const std::string& path, const TrainedGat& model) {
    nlohmann::json j;
    j["mode"] = model.mode == GatMode::general ? "general" : "time_specific";
    j["horizon"] = model.horizon;
    j["best_epoch"] = model.best_epoch;
    j["params"] = {{"input_dim", model.params.input_dim},
                   {"hidden", model.params.hidden},
                   {"leaky_slope", model.params.leaky_slope},
                   {"w", model.params.w},
                   {"attn", model.params.attn},
                   {"head_w", model.params.head_w},
                   {"head_b", model.params.head_b}};
    std::ofstream out(path);
    if (!out) throw IoError("tgat", "cannot write file", path);
    out << j.dump(2) << '\n';
}

TrainedGat read_gat_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("tgat", "cannot open file", path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("tgat", std::string("invalid model JSON: ") + e.what(), path);
    }
    TrainedGat model;
    model.mode = j.at("mode").get<std::string>() == "general" ? GatMode::general
                                                              : GatMode::time_specific;
    model.horizon = j.at("horizon").get<int>();
    model.best_epoch = j.value("best_epoch", 0);
    const auto& p = j.at("params");
    model.params.input_dim = p.at("input_dim").get<int>();
    model.params.hidden = p.at("hidden").get<int>();
    model.params.leaky_slope = p.at("leaky_slope").get<double>();
    model.params.w = p.at("w").get<std::vector<double>>();
    model.params.attn = p.at("attn").get<std::vector<double>>();
    model.params.head_w = p.at("head_w").get<std::vector<double>>();
    model.params.head_b = p.at("head_b").get<double>();
    return model;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogEntry>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("tgat", "cannot write file", path);
    write_csv_row(out, {"epoch", "lr", "train_loss", "val_loss", "val_auc"});
    for (const auto& e : log)
        write_csv_row(out, {std::to_string(e.epoch), format_double(e.lr),
                            format_double(e.train_loss), format_double(e.val_loss),
                            format_double(e.val_auc)});
}

}  // namespace bmt
