#include "mmclass/mtnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "mmclass/error.hpp"
#include "mmclass/kernels.hpp"

namespace mmc::mtnet {

namespace {

constexpr double kProbFloor = 1e-12;

void softmax_inplace(std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

double clamp_prob(double p) { return std::max(p, kProbFloor); }

struct TrunkState {
    std::vector<double> input;                // embedding after dropout
    std::vector<std::vector<double>> acts;    // post-relu per trunk layer

    const std::vector<double>& output(const MultitaskHeadModel& model) const {
        return model.trunk.empty() ? input : acts.back();
    }
};

void run_trunk(const MultitaskHeadModel& model, const std::vector<double>& embedding,
               Rng* dropout_rng, TrunkState& state) {
    const auto& topo = model.topology;
    if (embedding.size() != topo.input_dim)
        throw DataError("embedding has dimension " + std::to_string(embedding.size()) +
                        ", model expects " + std::to_string(topo.input_dim));

    if (dropout_rng && topo.dropout > 0.0) {
        const double keep = 1.0 - topo.dropout;
        state.input.resize(embedding.size());
        for (std::size_t i = 0; i < embedding.size(); ++i) {
            state.input[i] =
                dropout_rng->next_bernoulli(keep) ? embedding[i] / keep : 0.0;
        }
    } else {
        state.input = embedding;
    }

    state.acts.resize(model.trunk.size());
    const std::vector<double>* cur = &state.input;
    for (std::size_t l = 0; l < model.trunk.size(); ++l) {
        const Layer& layer = model.trunk[l];
        state.acts[l].resize(layer.rows);
        kernels::matvec(layer.w.data(), cur->data(), layer.b.data(),
                        state.acts[l].data(), layer.rows, layer.cols);
        kernels::relu(state.acts[l].data(), layer.rows);
        cur = &state.acts[l];
    }
}

std::vector<double> head_probs(const Layer& head, const std::vector<double>& trunk_out) {
    std::vector<double> z(head.rows);
    kernels::matvec(head.w.data(), trunk_out.data(), head.b.data(), z.data(),
                    head.rows, head.cols);
    softmax_inplace(z);
    return z;
}

/// d(loss_term)/d(logit_k) for one sample and one head.
void loss_dlogits(LossKind kind, double gamma, double class_weight,
                  const std::vector<double>& probs, int label,
                  std::vector<double>& dz) {
    const std::size_t k_count = probs.size();
    dz.resize(k_count);
    if (kind == LossKind::softmax_ce) {
        for (std::size_t k = 0; k < k_count; ++k) {
            const double delta = static_cast<int>(k) == label ? 1.0 : 0.0;
            dz[k] = class_weight * (probs[k] - delta);
        }
        return;
    }
    const double p = probs[static_cast<std::size_t>(label)];
    const double q = std::max(1.0 - p, 0.0);
    double bracket;
    if (gamma == 0.0) {
        bracket = -1.0;
    } else if (q == 0.0) {
        // Both focal terms vanish as p -> 1.
        bracket = 0.0;
    } else {
        bracket = gamma * p * std::pow(q, gamma - 1.0) * std::log(clamp_prob(p)) -
                  std::pow(q, gamma);
    }
    for (std::size_t k = 0; k < k_count; ++k) {
        const double delta = static_cast<int>(k) == label ? 1.0 : 0.0;
        dz[k] = bracket * (delta - probs[k]);
    }
}

double loss_term(LossKind kind, double gamma, double class_weight, double p) {
    const double log_p = std::log(clamp_prob(p));
    if (kind == LossKind::softmax_ce) return -class_weight * log_p;
    const double q = std::max(1.0 - p, 0.0);
    return -std::pow(q, gamma) * log_p;
}

struct ParamRefs {
    std::vector<std::vector<double>*> arrays;

    explicit ParamRefs(MultitaskHeadModel& model) {
        for (auto& layer : model.trunk) {
            arrays.push_back(&layer.w);
            arrays.push_back(&layer.b);
        }
        for (auto& layer : model.heads) {
            arrays.push_back(&layer.w);
            arrays.push_back(&layer.b);
        }
    }
};

struct GradRefs {
    std::vector<std::vector<double>*> arrays;

    explicit GradRefs(Gradients& g) {
        for (auto& layer : g.trunk) {
            arrays.push_back(&layer.w);
            arrays.push_back(&layer.b);
        }
        for (auto& layer : g.heads) {
            arrays.push_back(&layer.w);
            arrays.push_back(&layer.b);
        }
    }
};

}  // namespace

void HeadTopology::validate() const {
    if (input_dim == 0) throw ConfigError("topology: input_dim must be >= 1");
    for (const auto w : trunk_widths)
        if (w == 0) throw ConfigError("topology: trunk widths must be >= 1");
    if (head_widths.empty()) throw ConfigError("topology: at least one task head");
    for (const auto k : head_widths)
        if (k < 2) throw ConfigError("topology: every head needs >= 2 classes");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ConfigError("topology: dropout must be in [0, 1)");
}

Layer Layer::zeros(std::size_t rows, std::size_t cols) {
    Layer l;
    l.rows = rows;
    l.cols = cols;
    l.w.assign(rows * cols, 0.0);
    l.b.assign(rows, 0.0);
    return l;
}

std::size_t MultitaskHeadModel::trunk_output_dim() const {
    return topology.trunk_widths.empty() ? topology.input_dim
                                         : topology.trunk_widths.back();
}

MultitaskHeadModel MultitaskHeadModel::init(const HeadTopology& topo,
                                            std::uint64_t seed) {
    topo.validate();
    MultitaskHeadModel model;
    model.topology = topo;
    Rng rng(seed);
    auto fill = [&](Layer& layer) {
        for (double& v : layer.w) v = 0.02 * rng.next_normal();
        // biases stay zero
    };
    std::size_t prev = topo.input_dim;
    for (const auto width : topo.trunk_widths) {
        model.trunk.push_back(Layer::zeros(width, prev));
        fill(model.trunk.back());
        prev = width;
    }
    for (const auto k : topo.head_widths) {
        model.heads.push_back(Layer::zeros(k, prev));
        fill(model.heads.back());
    }
    return model;
}

Gradients Gradients::zeros_like(const MultitaskHeadModel& model) {
    Gradients g;
    for (const auto& layer : model.trunk)
        g.trunk.push_back(Layer::zeros(layer.rows, layer.cols));
    for (const auto& layer : model.heads)
        g.heads.push_back(Layer::zeros(layer.rows, layer.cols));
    return g;
}

std::vector<std::vector<double>> forward(const MultitaskHeadModel& model,
                                         const std::vector<double>& embedding,
                                         bool train_mode, Rng* rng) {
    TrunkState state;
    run_trunk(model, embedding, train_mode ? rng : nullptr, state);
    std::vector<std::vector<double>> out;
    out.reserve(model.heads.size());
    for (const auto& head : model.heads)
        out.push_back(head_probs(head, state.output(model)));
    return out;
}

namespace detail {

double loss_and_grads(const Dataset& data, const std::vector<std::size_t>& batch,
                      const MultitaskHeadModel& model, const TrainConfig& config,
                      int task_filter, Rng* dropout_rng, Gradients* out) {
    const std::size_t n_tasks = model.heads.size();
    double loss = 0.0;

    TrunkState state;
    std::vector<double> dz, dtrunk, dprev, tmp;
    for (const auto idx : batch) {
        const Sample& sample = data.at(idx);
        if (sample.labels.size() != n_tasks)
            throw DataError("sample carries " + std::to_string(sample.labels.size()) +
                            " labels, model has " + std::to_string(n_tasks) +
                            " tasks");
        run_trunk(model, sample.embedding, dropout_rng, state);
        const auto& trunk_out = state.output(model);

        bool any_grad = false;
        if (out) dtrunk.assign(trunk_out.size(), 0.0);
        for (std::size_t m = 0; m < n_tasks; ++m) {
            const int label = sample.labels[m];
            if (label < 0) continue;
            if (task_filter >= 0 && static_cast<std::size_t>(task_filter) != m)
                continue;
            const Layer& head = model.heads[m];
            if (label >= static_cast<int>(head.rows))
                throw DataError("label " + std::to_string(label) +
                                " outside head of size " + std::to_string(head.rows));
            const auto probs = head_probs(head, trunk_out);
            double class_weight = 1.0;
            if (config.loss == LossKind::softmax_ce && config.class_weights)
                class_weight =
                    config.class_weights->at(m).at(static_cast<std::size_t>(label));
            loss += loss_term(config.loss, config.gamma, class_weight,
                              probs[static_cast<std::size_t>(label)]);

            if (!out) continue;
            any_grad = true;
            loss_dlogits(config.loss, config.gamma, class_weight, probs, label, dz);
            Layer& ghead = out->heads[m];
            kernels::ger(ghead.w.data(), dz.data(), trunk_out.data(), head.rows,
                         head.cols);
            kernels::axpy(1.0, dz.data(), ghead.b.data(), head.rows);
            tmp.resize(head.cols);
            kernels::matvec_t(head.w.data(), dz.data(), tmp.data(), head.rows,
                              head.cols);
            kernels::axpy(1.0, tmp.data(), dtrunk.data(), head.cols);
        }

        if (!out || !any_grad || model.trunk.empty()) continue;
        std::vector<double>* d = &dtrunk;
        for (std::size_t l = model.trunk.size(); l-- > 0;) {
            const Layer& layer = model.trunk[l];
            kernels::relu_backward(state.acts[l].data(), d->data(), layer.rows);
            const auto& input = l == 0 ? state.input : state.acts[l - 1];
            Layer& glayer = out->trunk[l];
            kernels::ger(glayer.w.data(), d->data(), input.data(), layer.rows,
                         layer.cols);
            kernels::axpy(1.0, d->data(), glayer.b.data(), layer.rows);
            if (l > 0) {
                dprev.resize(layer.cols);
                kernels::matvec_t(layer.w.data(), d->data(), dprev.data(), layer.rows,
                                  layer.cols);
                std::swap(dprev, dtrunk);
                d = &dtrunk;
            }
        }
    }

    if (config.weight_decay != 0.0 && !config.decoupled_decay) {
        auto add_decay = [&](const std::vector<double>& w, std::vector<double>* g) {
            loss += config.weight_decay * 0.5 *
                    kernels::sum_squares(w.data(), w.size());
            if (g) kernels::axpy(config.weight_decay, w.data(), g->data(), w.size());
        };
        for (std::size_t l = 0; l < model.trunk.size(); ++l) {
            add_decay(model.trunk[l].w, out ? &out->trunk[l].w : nullptr);
            add_decay(model.trunk[l].b, out ? &out->trunk[l].b : nullptr);
        }
        for (std::size_t h = 0; h < model.heads.size(); ++h) {
            add_decay(model.heads[h].w, out ? &out->heads[h].w : nullptr);
            add_decay(model.heads[h].b, out ? &out->heads[h].b : nullptr);
        }
    }
    return loss;
}

}  // namespace detail

double loss_sce(const Dataset& data, const std::vector<std::size_t>& batch,
                const MultitaskHeadModel& model, double weight_decay,
                const std::vector<std::vector<double>>* class_weights) {
    TrainConfig config;
    config.loss = LossKind::softmax_ce;
    config.weight_decay = weight_decay;
    if (class_weights) config.class_weights = *class_weights;
    return detail::loss_and_grads(data, batch, model, config, -1, nullptr, nullptr);
}

double loss_focal(const Dataset& data, const std::vector<std::size_t>& batch,
                  const MultitaskHeadModel& model, double gamma,
                  double weight_decay) {
    if (gamma < 0.0) throw ConfigError("focal gamma must be >= 0");
    TrainConfig config;
    config.loss = LossKind::focal;
    config.gamma = gamma;
    config.weight_decay = weight_decay;
    return detail::loss_and_grads(data, batch, model, config, -1, nullptr, nullptr);
}

Gradients backward(const Dataset& data, const std::vector<std::size_t>& batch,
                   const MultitaskHeadModel& model, const TrainConfig& config,
                   int task_filter) {
    Gradients g = Gradients::zeros_like(model);
    detail::loss_and_grads(data, batch, model, config, task_filter, nullptr, &g);
    return g;
}

TrainLog train(MultitaskHeadModel& model, const Dataset& train_set,
               const Dataset& validation_set, const TrainConfig& config) {
    if (train_set.empty()) throw ConfigError("training set is empty");
    if (config.batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (config.max_epochs <= 0) throw ConfigError("max_epochs must be positive");
    if (config.patience < 0) throw ConfigError("patience must be >= 0");
    if (config.loss == LossKind::focal && config.gamma < 0.0)
        throw ConfigError("focal gamma must be >= 0");

    const std::size_t n_tasks = model.heads.size();
    imbalance::SampleIndex index;
    index.pools.resize(n_tasks);
    for (std::size_t m = 0; m < n_tasks; ++m)
        index.pools[m].resize(model.heads[m].rows);
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        const auto& labels = train_set[i].labels;
        if (labels.size() != n_tasks)
            throw DataError("training sample has wrong label count");
        for (std::size_t m = 0; m < n_tasks; ++m)
            if (labels[m] >= 0)
                index.pools[m][static_cast<std::size_t>(labels[m])].push_back(i);
    }

    imbalance::BatchSampler sampler(config.sampler, index, config.seed);
    Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    std::size_t total_labeled = 0;
    for (std::size_t m = 0; m < n_tasks; ++m) total_labeled += index.task_total(m);
    const std::int64_t batches_per_epoch =
        config.batches_per_epoch > 0
            ? config.batches_per_epoch
            : std::max<std::int64_t>(
                  1, (static_cast<std::int64_t>(total_labeled) + config.batch_size - 1) /
                         config.batch_size);

    ParamRefs params(model);
    std::vector<std::vector<double>> moment_m, moment_v;
    for (const auto* arr : params.arrays) {
        moment_m.emplace_back(arr->size(), 0.0);
        moment_v.emplace_back(arr->size(), 0.0);
    }

    std::vector<std::size_t> val_indices(validation_set.size());
    for (std::size_t i = 0; i < val_indices.size(); ++i) val_indices[i] = i;

    TrainLog log;
    auto best_trunk = model.trunk;
    auto best_heads = model.heads;
    double best_val = std::numeric_limits<double>::infinity();
    int stall = 0;
    std::int64_t step = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        EpochLog entry;
        entry.task_batches.assign(n_tasks, 0);
        double loss_sum = 0.0;

        for (std::int64_t b = 0; b < batches_per_epoch; ++b) {
            const auto batch = sampler.next_batch(config.batch_size);
            ++entry.task_batches[batch.task];

            Gradients grads = Gradients::zeros_like(model);
            loss_sum += detail::loss_and_grads(train_set, batch.samples, model, config,
                                               static_cast<int>(batch.task),
                                               &dropout_rng, &grads);
            ++step;
            const double corr1 =
                1.0 / (1.0 - std::pow(config.beta1, static_cast<double>(step)));
            const double corr2 =
                1.0 / (1.0 - std::pow(config.beta2, static_cast<double>(step)));

            GradRefs grefs(grads);
            for (std::size_t a = 0; a < params.arrays.size(); ++a) {
                auto& w = *params.arrays[a];
                kernels::adam_step(w.data(), grefs.arrays[a]->data(),
                                   moment_m[a].data(), moment_v[a].data(), w.size(),
                                   config.learning_rate, config.beta1, config.beta2,
                                   config.epsilon, corr1, corr2);
                if (config.decoupled_decay && config.weight_decay != 0.0)
                    kernels::scale(w.data(),
                                   1.0 - config.learning_rate * config.weight_decay,
                                   w.size());
            }
        }

        entry.train_loss = loss_sum / static_cast<double>(batches_per_epoch);
        entry.val_loss = detail::loss_and_grads(validation_set, val_indices, model,
                                                config, -1, nullptr, nullptr);
        log.epochs.push_back(entry);

        if (entry.val_loss < best_val) {
            best_val = entry.val_loss;
            log.best_epoch = epoch;
            best_trunk = model.trunk;
            best_heads = model.heads;
            stall = 0;
        } else {
            ++stall;
            if (stall > config.patience) break;
        }
    }

    model.trunk = std::move(best_trunk);
    model.heads = std::move(best_heads);
    log.best_val_loss = best_val;
    return log;
}

ModalityDecision predict_record(const MultitaskHeadModel& model,
                                const std::vector<std::vector<double>>& embeddings) {
    ModalityDecision decision(model.num_tasks());
    for (const auto& embedding : embeddings) {
        const auto probs = forward(model, embedding);
        for (std::size_t m = 0; m < probs.size(); ++m) {
            const auto best =
                std::max_element(probs[m].begin(), probs[m].end()) - probs[m].begin();
            const double score = probs[m][static_cast<std::size_t>(best)];
            if (decision[m].missing() || score > decision[m].confidence) {
                decision[m].cls = static_cast<int>(best);
                decision[m].confidence = score;
            }
        }
    }
    return decision;
}

namespace {

constexpr char kMagic[4] = {'M', 'M', 'H', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated checkpoint " + path.string());
    return v;
}

void put_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::ifstream& in, std::vector<double>& v,
                 const std::filesystem::path& path) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint " + path.string());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const MultitaskHeadModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint64_t>(model.topology.input_dim));
    put(out, static_cast<std::uint64_t>(model.topology.trunk_widths.size()));
    for (const auto w : model.topology.trunk_widths)
        put(out, static_cast<std::uint64_t>(w));
    put(out, model.topology.dropout);
    put(out, static_cast<std::uint64_t>(model.topology.head_widths.size()));
    for (const auto k : model.topology.head_widths)
        put(out, static_cast<std::uint64_t>(k));
    for (const auto& layer : model.trunk) {
        put_doubles(out, layer.w);
        put_doubles(out, layer.b);
    }
    for (const auto& layer : model.heads) {
        put_doubles(out, layer.w);
        put_doubles(out, layer.b);
    }
    if (!out) throw IoError("write failed for checkpoint " + path.string());
}

MultitaskHeadModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("not a model checkpoint: " + path.string());
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));

    HeadTopology topo;
    topo.input_dim = get<std::uint64_t>(in, path);
    topo.trunk_widths.resize(get<std::uint64_t>(in, path));
    for (auto& w : topo.trunk_widths) w = get<std::uint64_t>(in, path);
    topo.dropout = get<double>(in, path);
    topo.head_widths.resize(get<std::uint64_t>(in, path));
    for (auto& k : topo.head_widths) k = get<std::uint64_t>(in, path);

    MultitaskHeadModel model;
    model.topology = topo;
    std::size_t prev = topo.input_dim;
    for (const auto width : topo.trunk_widths) {
        model.trunk.push_back(Layer::zeros(width, prev));
        prev = width;
    }
    for (const auto k : topo.head_widths) model.heads.push_back(Layer::zeros(k, prev));
    for (auto& layer : model.trunk) {
        get_doubles(in, layer.w, path);
        get_doubles(in, layer.b, path);
    }
    for (auto& layer : model.heads) {
        get_doubles(in, layer.w, path);
        get_doubles(in, layer.b, path);
    }
    char extra;
    if (in.read(&extra, 1))
        throw ParseError("trailing bytes in checkpoint " + path.string());
    return model;
}

}  // namespace mmc::mtnet
