#include "unmix/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "unmix/bundle_io.hpp"
#include "unmix/errors.hpp"

namespace unmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ParamRef {
    const char* name;
    const Tensor* tensor;
};

std::vector<ParamRef> list_params(const SscuModel& model) {
    return {
        {"decoder", &model.decoder_weight},
        {"sae_encoder", &model.sae.encoder_weight},
        {"sae_bn_gamma", &model.sae.bn_gamma},
        {"sae_bn_beta", &model.sae.bn_beta},
        {"sae_bn_running_mean", &model.sae.bn_running_mean},
        {"sae_bn_running_var", &model.sae.bn_running_var},
        {"scae_conv1", &model.scae.conv[0]},
        {"scae_conv2", &model.scae.conv[1]},
        {"scae_conv3", &model.scae.conv[2]},
        {"scae_conv4", &model.scae.conv[3]},
        {"scae_fc_hidden", &model.scae.fc_hidden},
        {"scae_fc_out", &model.scae.fc_out},
    };
}

}  // namespace

void save_checkpoint(const SscuModel& model, int epoch, const fs::path& dir) {
    fs::create_directories(dir / "params");
    json j;
    j["bands"] = model.bands;
    j["endmembers"] = model.endmembers;
    j["epoch"] = epoch;
    j["seed"] = model.config.seed;
    j["config"] = {{"lambda", model.config.lambda_sparsity},
                   {"mu", model.config.mu_collab},
                   {"lr_encoder", model.config.lr_encoder},
                   {"lr_decoder", model.config.lr_decoder},
                   {"epochs", model.config.epochs},
                   {"batch_size", model.config.batch_pixels},
                   {"dropout_rate", model.config.dropout_rate},
                   {"l1_eps", model.config.l1_eps},
                   {"deterministic", model.config.deterministic}};
    json shapes;
    for (const auto& ref : list_params(model)) shapes[ref.name] = ref.tensor->shape;
    j["params"] = shapes;
    std::ofstream out(dir / "model.json", std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write model.json");
    out << j.dump(2) << "\n";
    for (const auto& ref : list_params(model))
        write_f32le(dir / "params" / (std::string(ref.name) + ".raw"), ref.tensor->data.data(),
                    ref.tensor->numel());
}

SscuModel load_checkpoint(const fs::path& dir, int* epoch) {
    std::ifstream in(dir / "model.json");
    if (!in) throw FormatError("checkpoint: missing model.json in " + dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint: bad model.json: " + std::string(e.what()));
    }
    SscuModel model;
    try {
        model.bands = j.at("bands").get<std::size_t>();
        model.endmembers = j.at("endmembers").get<std::size_t>();
        if (epoch) *epoch = j.at("epoch").get<int>();
        const auto& c = j.at("config");
        model.config.lambda_sparsity = c.at("lambda").get<double>();
        model.config.mu_collab = c.at("mu").get<double>();
        model.config.lr_encoder = c.at("lr_encoder").get<double>();
        model.config.lr_decoder = c.at("lr_decoder").get<double>();
        model.config.epochs = c.at("epochs").get<int>();
        model.config.batch_pixels = c.at("batch_size").get<int>();
        model.config.dropout_rate = c.at("dropout_rate").get<double>();
        model.config.l1_eps = c.at("l1_eps").get<double>();
        model.config.deterministic = c.at("deterministic").get<bool>();
        model.config.seed = j.at("seed").get<std::uint64_t>();

        auto load_param = [&](const char* name, Tensor* t) {
            const auto shape = j.at("params").at(name).get<std::vector<std::size_t>>();
            *t = Tensor(shape, read_f32le(dir / "params" / (std::string(name) + ".raw"),
                                          Tensor::count(shape)));
        };
        load_param("decoder", &model.decoder_weight);
        load_param("sae_encoder", &model.sae.encoder_weight);
        load_param("sae_bn_gamma", &model.sae.bn_gamma);
        load_param("sae_bn_beta", &model.sae.bn_beta);
        load_param("sae_bn_running_mean", &model.sae.bn_running_mean);
        load_param("sae_bn_running_var", &model.sae.bn_running_var);
        load_param("scae_conv1", &model.scae.conv[0]);
        load_param("scae_conv2", &model.scae.conv[1]);
        load_param("scae_conv3", &model.scae.conv[2]);
        load_param("scae_conv4", &model.scae.conv[3]);
        load_param("scae_fc_hidden", &model.scae.fc_hidden);
        load_param("scae_fc_out", &model.scae.fc_out);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint: field error: " + std::string(e.what()));
    }
    model.adam_sae_encoder = nn::AdamState::for_param(model.sae.encoder_weight);
    model.adam_bn_gamma = nn::AdamState::for_param(model.sae.bn_gamma);
    model.adam_bn_beta = nn::AdamState::for_param(model.sae.bn_beta);
    for (std::size_t s = 0; s < 4; ++s)
        model.adam_conv[s] = nn::AdamState::for_param(model.scae.conv[s]);
    model.adam_fc_hidden = nn::AdamState::for_param(model.scae.fc_hidden);
    model.adam_fc_out = nn::AdamState::for_param(model.scae.fc_out);
    model.adam_decoder = nn::AdamState::for_param(model.decoder_weight);
    return model;
}

}  // namespace unmix
