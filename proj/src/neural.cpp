#include "pyrocast/neural.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <sstream>

#include "pyrocast/binio.hpp"
#include "pyrocast/metrics.hpp"

namespace pyrocast {

namespace {

std::vector<std::int64_t> batch_shape(const std::vector<std::int64_t>& dims, std::int64_t n) {
    std::vector<std::int64_t> shape{n};
    shape.insert(shape.end(), dims.begin(), dims.end());
    return shape;
}

// Fills x[0..m) and labels from records order[off..off+m).
void fill_batch(const SampleSource& src, const std::vector<std::int64_t>& order, std::int64_t off,
                std::int64_t m, Tensor<float>& x, std::vector<int>& labels) {
    std::int64_t payload = src.payload_size();
    labels.resize(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        std::int64_t rec = order[static_cast<std::size_t>(off + i)];
        src.fetch(rec, x.data() + i * payload);
        labels[static_cast<std::size_t>(i)] = src.key(rec).label;
    }
}

std::string where(const char* phase, int epoch, std::int64_t batch) {
    return std::string(phase) + " at epoch " + std::to_string(epoch) + ", batch " +
           std::to_string(batch + 1);
}

std::vector<Tensor<float>> snapshot(const Model<float>& model) {
    std::vector<Tensor<float>> out;
    out.reserve(model.params().items().size());
    for (const auto& p : model.params().items()) out.push_back(p.value);
    return out;
}

}  // namespace

std::vector<double> score_batch(const Model<float>& model, Tensor<float> x) {
    std::int64_t n = x.dim(0);
    Graph<float> g;
    RngStream unused(0, "eval");
    auto pass = model.run(g, std::move(x), RunMode::eval, unused);
    const Tensor<float>& logits = g.value(pass.logits);
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        scores[static_cast<std::size_t>(i)] = softmax_probs(logits.data() + 2 * i, 2)[1];
    return scores;
}

TrainConfig TrainConfig::reference_for(const std::string& architecture) {
    TrainConfig c;
    if (architecture == "lstm") {
        c.learning_rate = 1e-3;
        c.weight_decay = 1e-2;
    } else if (architecture == "cnn") {
        c.learning_rate = 4e-4;
        c.weight_decay = 3e-2;
    } else if (architecture == "convlstm") {
        c.learning_rate = 1e-4;
        c.weight_decay = 3e-2;
    } else {
        throw parameter_error("unknown architecture '" + architecture + "'");
    }
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"weight_decay", weight_decay},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("bad training config: ") + e.what());
    }
    return c;
}

TrainResult train(Model<float>& model, const SampleSource& train_data,
                  const SampleSource* validation, const TrainConfig& config,
                  std::ostream* progress) {
    if (train_data.size() == 0) throw parameter_error("training set is empty");
    if (train_data.dims() != model.input_dims())
        throw schema_error("training sample dims do not match " + model.architecture() +
                           " input dims");
    if (validation && validation->size() > 0 && validation->dims() != model.input_dims())
        throw schema_error("validation sample dims do not match model input dims");
    if (config.epochs < 1) throw parameter_error("epochs must be at least 1");
    if (config.batch_size < 1) throw parameter_error("batch size must be at least 1");
    if (config.learning_rate < 0 || config.weight_decay < 0)
        throw parameter_error("learning rate and weight decay must be non-negative");

    auto& params = model.params().items();
    std::vector<AdamState<float>> opt;
    opt.reserve(params.size());
    for (const auto& p : params) opt.emplace_back(p.value.shape());

    RngStream root(config.seed, "train");
    RngStream shuffle_base = root.split("shuffle");
    RngStream dropout_base = root.split("dropout");

    std::int64_t n = train_data.size();
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    bool has_val = validation && validation->size() > 0;
    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> labels;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        RngStream sh = shuffle_base.split(static_cast<std::uint64_t>(epoch));
        for (std::int64_t i = n - 1; i > 0; --i) {
            std::int64_t j =
                static_cast<std::int64_t>(sh.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double loss_sum = 0.0;
        RngStream epoch_drop = dropout_base.split(static_cast<std::uint64_t>(epoch));
        for (std::int64_t off = 0, batch = 0; off < n; off += config.batch_size, ++batch) {
            std::int64_t m = std::min<std::int64_t>(config.batch_size, n - off);
            Tensor<float> x(batch_shape(model.input_dims(), m));
            fill_batch(train_data, order, off, m, x, labels);

            Graph<float> g;
            RngStream drop = epoch_drop.split(static_cast<std::uint64_t>(batch));
            double loss_value;
            typename Graph<float>::Var loss;
            typename Model<float>::Pass pass;
            try {
                pass = model.run(g, std::move(x), RunMode::train, drop);
                loss = g.softmax_cross_entropy(pass.logits, labels);
                loss_value = g.value(loss)[0];
            } catch (const numeric_error& e) {
                throw divergence_error(where("training diverged", epoch, batch) + ": " +
                                       e.what());
            }
            if (!std::isfinite(loss_value))
                throw divergence_error(where("training diverged", epoch, batch) +
                                       ": loss is not finite");
            loss_sum += loss_value * static_cast<double>(m);

            g.backward(loss);
            for (std::size_t k = 0; k < params.size(); ++k)
                adam_step(params[k].value, g.grad(pass.param_vars[k]), opt[k],
                          config.learning_rate, config.weight_decay, params[k].decay);
        }

        EpochLog row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(n);

        if (has_val) {
            std::int64_t vn = validation->size();
            std::vector<std::int64_t> vorder(static_cast<std::size_t>(vn));
            for (std::int64_t i = 0; i < vn; ++i) vorder[static_cast<std::size_t>(i)] = i;
            double vsum = 0.0;
            std::vector<double> scores;
            std::vector<std::uint8_t> vlabels;
            scores.reserve(static_cast<std::size_t>(vn));
            vlabels.reserve(static_cast<std::size_t>(vn));
            RngStream unused(0, "eval");
            for (std::int64_t off = 0, batch = 0; off < vn; off += config.batch_size, ++batch) {
                std::int64_t m = std::min<std::int64_t>(config.batch_size, vn - off);
                Tensor<float> x(batch_shape(model.input_dims(), m));
                fill_batch(*validation, vorder, off, m, x, labels);
                Graph<float> g;
                double loss_value;
                typename Model<float>::Pass pass;
                try {
                    pass = model.run(g, std::move(x), RunMode::eval, unused);
                    loss_value =
                        g.value(g.softmax_cross_entropy(pass.logits, labels))[0];
                } catch (const numeric_error& e) {
                    throw divergence_error(where("validation diverged", epoch, batch) + ": " +
                                           e.what());
                }
                vsum += loss_value * static_cast<double>(m);
                const Tensor<float>& logits = g.value(pass.logits);
                for (std::int64_t i = 0; i < m; ++i) {
                    scores.push_back(softmax_probs(logits.data() + 2 * i, 2)[1]);
                    vlabels.push_back(static_cast<std::uint8_t>(labels[static_cast<std::size_t>(i)]));
                }
            }
            row.val_loss = vsum / static_cast<double>(vn);
            std::int64_t pos = std::count(vlabels.begin(), vlabels.end(), std::uint8_t(1));
            if (pos > 0 && pos < vn) row.val_auroc = auroc(scores, vlabels);
            if (*row.val_loss < best) {
                best = *row.val_loss;
                result.best_epoch = epoch;
                result.best_val_loss = row.val_loss;
                result.best_params = snapshot(model);
            }
        }

        result.log.push_back(row);
        if (progress) {
            std::ostringstream line;
            line << model.architecture() << " epoch " << epoch << "/" << config.epochs
                 << " train_loss " << std::setprecision(6) << row.train_loss;
            if (row.val_loss) line << " val_loss " << *row.val_loss;
            if (row.val_auroc) line << " val_auroc " << *row.val_auroc;
            (*progress) << line.str() << "\n";
        }
    }

    result.final_params = snapshot(model);
    if (!has_val) {
        result.best_epoch = config.epochs;
        result.best_params = result.final_params;
    }
    return result;
}

void set_params(Model<float>& model, const std::vector<Tensor<float>>& values) {
    auto& params = model.params().items();
    if (values.size() != params.size())
        throw parameter_error("parameter snapshot has " + std::to_string(values.size()) +
                              " tensors, model needs " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (values[i].shape() != params[i].value.shape())
            throw dimension_error("parameter '" + params[i].name + "' shape mismatch");
        params[i].value = values[i];
    }
}

std::unique_ptr<Model<float>> make_model(const std::string& architecture,
                                         const std::vector<std::int64_t>& input_dims,
                                         RngStream init, std::int64_t width) {
    if (width < 0) throw parameter_error("model width must be positive");
    if (architecture == "lstm")
        return std::make_unique<LSTMModel<float>>(input_dims, init, width ? width : 64);
    if (architecture == "cnn")
        return std::make_unique<CNNModel<float>>(input_dims, init, width ? width : 16);
    if (architecture == "convlstm")
        return std::make_unique<ConvLSTMModel<float>>(input_dims, init, width ? width : 16);
    throw parameter_error("unknown architecture '" + architecture + "'");
}

// The single width hyperparameter of each architecture, recovered from shapes.
static std::int64_t model_width(const Model<float>& model) {
    const Param<float>* bias = model.params().find(
        model.architecture() == "cnn" ? "conv.bias" : "cell.bias");
    if (!bias) throw state_error("model has no cell bias parameter");
    return model.architecture() == "cnn" ? bias->value.size() : bias->value.size() / 4;
}

static const char kCheckpointMagic[4] = {'P', 'M', 'C', '1'};

void save_checkpoint(const std::string& path, const Model<float>& model,
                     const CheckpointInfo& info) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : model.params().items())
        params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"decay", p.decay}});
    nlohmann::json header{
        {"format", "model_checkpoint"},
        {"architecture", model.architecture()},
        {"modality", to_string(info.modality)},
        {"input_dims", model.input_dims()},
        {"hidden_units", model_width(model)},
        {"params", params},
        {"config", info.config.to_json()},
        {"schema_hash", to_hex(info.schema_hash)},
        {"epoch", info.epoch},
        {"val_loss", info.val_loss ? nlohmann::json(*info.val_loss) : nlohmann::json()},
        {"val_auroc", info.val_auroc ? nlohmann::json(*info.val_auroc) : nlohmann::json()},
        {"standardization", info.stats ? info.stats->to_json() : nlohmann::json()},
        {"provenance", info.provenance.is_null() ? nlohmann::json::object() : info.provenance},
    };
    auto os = binio::open_out(path);
    binio::write_header(os, kCheckpointMagic, header);
    for (const auto& p : model.params().items())
        binio::write_array(os, p.value.data(), p.value.size());
    if (!os) throw runtime_failure("failed writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    auto is = binio::open_in(path);
    nlohmann::json header = binio::read_header(is, kCheckpointMagic);
    LoadedCheckpoint out;
    std::vector<std::int64_t> dims;
    std::int64_t width = 0;
    nlohmann::json params;
    try {
        out.info.architecture = header.at("architecture").get<std::string>();
        out.info.modality = modality_from(header.at("modality").get<std::string>());
        dims = header.at("input_dims").get<std::vector<std::int64_t>>();
        width = header.at("hidden_units").get<std::int64_t>();
        params = header.at("params");
        out.info.config = TrainConfig::from_json(header.at("config"));
        out.info.schema_hash =
            std::stoull(header.at("schema_hash").get<std::string>(), nullptr, 16);
        out.info.epoch = header.at("epoch").get<int>();
        if (!header.at("val_loss").is_null())
            out.info.val_loss = header.at("val_loss").get<double>();
        if (!header.at("val_auroc").is_null())
            out.info.val_auroc = header.at("val_auroc").get<double>();
        if (!header.at("standardization").is_null())
            out.info.stats = Standardization::from_json(header.at("standardization"));
        out.info.provenance = header.at("provenance");
    } catch (const std::exception& e) {
        throw format_error("invalid checkpoint header in " + path + ": " + e.what());
    }

    try {
        out.model = make_model(out.info.architecture, dims, RngStream(0, "checkpoint"), width);
    } catch (const std::exception& e) {
        throw format_error("checkpoint does not describe a loadable model: " +
                           std::string(e.what()));
    }
    auto& items = out.model->params().items();
    if (params.size() != items.size())
        throw format_error("checkpoint declares " + std::to_string(params.size()) +
                           " parameters, architecture has " + std::to_string(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& meta = params[i];
        if (meta.at("name").get<std::string>() != items[i].name ||
            meta.at("shape").get<std::vector<std::int64_t>>() != items[i].value.shape())
            throw format_error("checkpoint parameter '" +
                               meta.at("name").get<std::string>() +
                               "' does not match architecture layout");
        binio::read_array(is, items[i].value.data(), items[i].value.size());
    }
    if (is.peek() != std::char_traits<char>::eof())
        throw format_error("checkpoint has trailing bytes: " + path);
    return out;
}

}  // namespace pyrocast
