// Command-line surface of the unmixing toolkit: scene synthesis, classical
// initialization, segmentation, two-stream training, evaluation and sweeps.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "unmix/bundle_io.hpp"
#include "unmix/checkpoint.hpp"
#include "unmix/errors.hpp"
#include "unmix/fcls.hpp"
#include "unmix/gradcheck_suite.hpp"
#include "unmix/metrics.hpp"
#include "unmix/parallel.hpp"
#include "unmix/slic.hpp"
#include "unmix/sscu.hpp"
#include "unmix/synth.hpp"
#include "unmix/vca.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace unmix;

namespace {

constexpr const char* kVersion = "0.2.0";

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + file.string());
    out << text;
}

void write_provenance(const fs::path& dir, const std::string& command, const json& config) {
    json j;
    j["command"] = command;
    j["toolkit_version"] = kVersion;
    j["config"] = config;
    write_text(dir / "provenance.json", j.dump(2) + "\n");
}

std::string format_f32(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<float>(v));
    return buf;
}

void write_endmember_csv(const fs::path& file, const EndmemberSet& em) {
    std::string csv;
    for (std::size_t i = 0; i < em.count(); ++i) {
        for (std::size_t b = 0; b < em.bands(); ++b) {
            if (b) csv += ',';
            csv += format_f32(em.row(i)[b]);
        }
        csv += '\n';
    }
    write_text(file, csv);
}

EndmemberSet read_endmember_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot open " + file.string());
    std::vector<double> values;
    std::string line;
    std::size_t rows = 0, cols = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ls, cell, ',')) {
            values.push_back(std::stod(cell));
            ++c;
        }
        if (cols == 0) cols = c;
        if (c != cols) throw FormatError(file.string() + ": ragged row");
        ++rows;
    }
    EndmemberSet em;
    em.signatures = Tensor({rows, cols}, std::move(values));
    return em;
}

void write_abundance_raw(const fs::path& dir, const AbundanceField& field) {
    write_f32le(dir / "abundances.raw", field.fractions.data.data(), field.fractions.numel());
    json hdr;
    hdr["height"] = field.height;
    hdr["width"] = field.width;
    hdr["endmembers"] = field.endmembers;
    hdr["dtype"] = "f32le";
    hdr["order"] = "pixel-major, endmember fastest";
    write_text(dir / "abundances.json", hdr.dump(2) + "\n");
}

AbundanceField read_abundance_raw(const fs::path& dir) {
    std::ifstream in(dir / "abundances.json");
    if (!in) throw FormatError("missing " + (dir / "abundances.json").string());
    json hdr;
    in >> hdr;
    AbundanceField field;
    field.height = hdr.at("height").get<std::size_t>();
    field.width = hdr.at("width").get<std::size_t>();
    field.endmembers = hdr.at("endmembers").get<std::size_t>();
    field.fractions =
        Tensor({field.height, field.width, field.endmembers},
               read_f32le(dir / "abundances.raw",
                          field.height * field.width * field.endmembers));
    return field;
}

// binary PGM (P5); maxval 255 or 65535 (big-endian rows for 16-bit)
void write_pgm(const fs::path& file, std::size_t H, std::size_t W,
               const std::vector<unsigned>& values, unsigned maxval) {
    std::string bytes = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n" +
                        std::to_string(maxval) + "\n";
    for (unsigned v : values) {
        if (maxval > 255) {
            bytes.push_back(static_cast<char>((v >> 8) & 0xff));
            bytes.push_back(static_cast<char>(v & 0xff));
        } else {
            bytes.push_back(static_cast<char>(v & 0xff));
        }
    }
    write_text(file, bytes);
}

struct PipelineArtifacts {
    EndmemberSet vca_endmembers;
    AbundanceField fcls_abundances;
    Segmentation segmentation;
    SscuModel model;
    TrainResult train_result;
    UnmixResult result;
};

PipelineArtifacts run_pipeline(const DatasetBundle& bundle, std::size_t p, const SlicConfig& slic_cfg,
                               const TrainConfig& train_cfg) {
    PipelineArtifacts art;
    const Tensor Y = flatten(bundle.cube);
    Tensor Ynn = Y;
    for (double& v : Ynn.data) v = std::max(0.0, v);

    VcaConfig vca_cfg;
    vca_cfg.endmembers = p;
    vca_cfg.seed = train_cfg.seed;
    art.vca_endmembers = vca(Ynn, vca_cfg).endmembers;

    art.fcls_abundances = fcls_field(Y, art.vca_endmembers, bundle.cube.height, bundle.cube.width);
    art.segmentation = slic_segment(art.fcls_abundances, slic_cfg);
    art.model = init_model(bundle.cube.bands, p, art.vca_endmembers, train_cfg);
    art.train_result = train(art.model, bundle.cube, art.segmentation);
    art.result = extract_results(art.model, bundle.cube);
    return art;
}

void emit_unmix_artifacts(const fs::path& out, const DatasetBundle& bundle,
                          const PipelineArtifacts& art, std::uint64_t seed,
                          const std::string& config_hash) {
    fs::create_directories(out);
    write_endmember_csv(out / "endmembers.csv", art.result.endmembers);
    write_abundance_raw(out, art.result.abundances);

    const std::size_t H = art.result.abundances.height, W = art.result.abundances.width;
    const std::size_t p = art.result.abundances.endmembers;
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<unsigned> img(H * W);
        for (std::size_t k = 0; k < H * W; ++k) {
            const double v = art.result.abundances.fractions.data[k * p + j];
            img[k] = static_cast<unsigned>(
                std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
        }
        write_pgm(out / ("abundance_" + std::to_string(j) + ".pgm"), H, W, img, 255);
    }

    std::string trace = "epoch,L_SAE,L_SCAE,L_COL,total\n";
    for (std::size_t e = 0; e < art.train_result.trace.size(); ++e) {
        const auto& t = art.train_result.trace[e];
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", e + 1, t.l_sae, t.l_scae,
                      t.l_col, t.total);
        trace += buf;
    }
    write_text(out / "loss_trace.csv", trace);

    save_checkpoint(art.model, art.model.config.epochs, out / "model");

    if (bundle.gt_endmembers) {
        const AbundanceField* gt_ab =
            bundle.gt_abundances ? &*bundle.gt_abundances : nullptr;
        MetricReport sscu_report = evaluate(art.result.endmembers,
                                            gt_ab ? &art.result.abundances : nullptr,
                                            *bundle.gt_endmembers, gt_ab, seed, config_hash);
        MetricReport vca_report = evaluate(art.vca_endmembers, gt_ab ? &art.fcls_abundances : nullptr,
                                           *bundle.gt_endmembers, gt_ab, seed, config_hash);
        json j;
        j["sscu"] = json::parse(sscu_report.to_json());
        j["vca_baseline"] = json::parse(vca_report.to_json());
        j["warnings"] = art.result.warnings;
        write_text(out / "metrics.json", j.dump(2) + "\n");
        std::cout << sscu_report.to_table();
    }
}

json sweep_run(const fs::path& out_dir, const DatasetBundle& bundle, std::size_t p, double S,
               double m, std::uint64_t seed, const TrainConfig& base_cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    SlicConfig slic_cfg;
    slic_cfg.size_s = S;
    slic_cfg.compactness = m;
    slic_cfg.seed = seed;
    TrainConfig cfg = base_cfg;
    cfg.seed = seed;
    PipelineArtifacts art = run_pipeline(bundle, p, slic_cfg, cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json row;
    row["s"] = S;
    row["m"] = m;
    row["seed"] = seed;
    row["wall_time_s"] = wall;
    if (bundle.gt_endmembers) {
        const auto perm = match_endmembers(art.result.endmembers, *bundle.gt_endmembers);
        row["mean_sad"] = sad_metric(art.result.endmembers, *bundle.gt_endmembers, perm).mean;
        if (bundle.gt_abundances)
            row["mean_rmse"] =
                rmse_metric(art.result.abundances, *bundle.gt_abundances, perm).mean;
    }
    (void)out_dir;
    return row;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperspectral linear unmixing toolkit (two-stream collaborative autoencoder)"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);


    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene bundle");
    SynthConfig synth_cfg;
    synth_cfg.sigma_g = 2.0;
    std::string synth_out;
    double synth_snr = 30.0;
    bool synth_noiseless = false;
    synth_cmd->add_option("--out", synth_out, "output bundle directory")->required();
    synth_cmd->add_option("--height", synth_cfg.height);
    synth_cmd->add_option("--width", synth_cfg.width);
    synth_cmd->add_option("--endmembers", synth_cfg.endmembers);
    synth_cmd->add_option("--bands", synth_cfg.bands);
    synth_cmd->add_option("--sigma-g", synth_cfg.sigma_g, "spatial smoothing std (pixels)");
    synth_cmd->add_option("--snr-db", synth_snr, "noise level in dB");
    synth_cmd->add_flag("--noiseless", synth_noiseless, "skip the noise term");
    synth_cmd->add_option("--alpha-max", synth_cfg.alpha_max, "purity cap in (0,1]");
    synth_cmd->add_option("--seed", synth_cfg.seed);

    // shared pipeline options (init/segment/unmix/sweep)
    struct PipeOpts {
        std::string data, out;
        std::size_t endmembers = 0;
        double size_s = 5.0;
        double compactness = 0.1;
        int iterations = 10;
        TrainConfig train;
        bool deterministic = false;
    } po;

    auto add_data_opts = [&](CLI::App* cmd, bool need_out) {
        cmd->add_option("--data", po.data, "input bundle directory")->required();
        auto* o = cmd->add_option("--out", po.out, "output directory");
        if (need_out) o->required();
        cmd->add_option("--endmembers", po.endmembers,
                        "endmember count (defaults to the ground truth's)");
        cmd->add_option("--seed", po.train.seed);
        cmd->add_flag("--deterministic", po.deterministic,
                      "single-threaded bitwise-reproducible mode");
    };
    auto add_slic_opts = [&](CLI::App* cmd) {
        cmd->add_option("--superpixel-size", po.size_s, "nominal superpixel size S");
        cmd->add_option("--compactness", po.compactness, "compactness weight m");
        cmd->add_option("--slic-iterations", po.iterations);
    };
    auto add_train_opts = [&](CLI::App* cmd) {
        cmd->add_option("--lambda", po.train.lambda_sparsity, "sparsity weight");
        cmd->add_option("--mu", po.train.mu_collab, "collaboration weight");
        cmd->add_option("--lr-encoder", po.train.lr_encoder);
        cmd->add_option("--lr-decoder", po.train.lr_decoder);
        cmd->add_option("--epochs", po.train.epochs);
        cmd->add_option("--batch-size", po.train.batch_pixels,
                        "member pixels per batch (whole superpixels)");
        cmd->add_option("--dropout", po.train.dropout_rate);
    };

    auto* init_cmd = app.add_subcommand("init", "classical initializers: VCA endmembers + FCLS abundances");
    add_data_opts(init_cmd, true);

    auto* segment_cmd = app.add_subcommand("segment", "abundance-driven SLIC superpixels");
    add_data_opts(segment_cmd, true);
    add_slic_opts(segment_cmd);

    auto* unmix_cmd = app.add_subcommand("unmix", "full pipeline: VCA, FCLS, SLIC, training, extraction");
    add_data_opts(unmix_cmd, true);
    add_slic_opts(unmix_cmd);
    add_train_opts(unmix_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "match and score estimated endmembers/abundances");
    std::string eval_est, eval_data, eval_out;
    eval_cmd->add_option("--est", eval_est, "directory with endmembers.csv (+ abundances.raw)")
        ->required();
    eval_cmd->add_option("--data", eval_data, "ground-truth bundle directory")->required();
    eval_cmd->add_option("--out", eval_out, "output directory (defaults to --est)");

    auto* sweep_cmd = app.add_subcommand("sweep", "grids over S/m or SNR with repeats");
    std::vector<double> sweep_s, sweep_m, sweep_snr;
    int sweep_repeats = 3;
    std::uint64_t scene_seed = 0;
    SynthConfig sweep_scene;
    sweep_scene.sigma_g = 2.0;
    add_data_opts(sweep_cmd, true);
    sweep_cmd->get_option("--data")->required(false);
    add_slic_opts(sweep_cmd);
    add_train_opts(sweep_cmd);
    sweep_cmd->add_option("--s-list", sweep_s, "superpixel sizes to sweep");
    sweep_cmd->add_option("--m-list", sweep_m, "compactness values to sweep");
    sweep_cmd->add_option("--snr-list", sweep_snr, "SNR grid (generates scenes internally)");
    sweep_cmd->add_option("--repeats", sweep_repeats, "seeds per grid point");
    sweep_cmd->add_option("--scene-seed", scene_seed, "scene content seed for SNR sweeps");
    sweep_cmd->add_option("--scene-bands", sweep_scene.bands);
    sweep_cmd->add_option("--scene-sigma-g", sweep_scene.sigma_g);
    sweep_cmd->add_option("--scene-height", sweep_scene.height);
    sweep_cmd->add_option("--scene-width", sweep_scene.width);
    sweep_cmd->add_option("--scene-endmembers", sweep_scene.endmembers);
    sweep_cmd->add_option("--scene-alpha-max", sweep_scene.alpha_max);

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference verification of every op");

    // JSON config file: defaults < config < explicit flags. The file is
    // handled in a pre-pass and its keys injected as flags, so unknown keys
    // fail parsing just like unknown flags.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            std::ifstream in(args[i + 1]);
            if (!in) {
                std::cerr << "cannot open config file " << args[i + 1] << "\n";
                return 2;
            }
            json cfg;
            try {
                in >> cfg;
            } catch (const json::exception& e) {
                std::cerr << "bad config file: " << e.what() << "\n";
                return 2;
            }
            args.erase(args.begin() + static_cast<long>(i),
                       args.begin() + static_cast<long>(i) + 2);
            for (const auto& [key, value] : cfg.items()) {
                const std::string flag = "--" + key;
                bool given = false;
                for (const auto& a : args)
                    if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
                if (given) continue;
                args.push_back(flag);
                if (!value.is_boolean())
                    args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
                else if (!value.get<bool>())
                    args.pop_back();  // false flag: drop it
            }
            break;
        }
    }

    try {
        std::vector<const char*> cargs;
        cargs.push_back(argv[0]);
        for (const auto& a : args) cargs.push_back(a.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth_cmd->parsed()) {
            synth_cfg.snr_db = synth_noiseless ? std::nullopt : std::optional<double>(synth_snr);
            const DatasetBundle bundle = generate_scene(synth_cfg);
            save_bundle(bundle, synth_out);
            json cfg;
            cfg["height"] = synth_cfg.height;
            cfg["width"] = synth_cfg.width;
            cfg["endmembers"] = synth_cfg.endmembers;
            cfg["bands"] = synth_cfg.bands;
            cfg["sigma-g"] = synth_cfg.sigma_g;
            if (synth_cfg.snr_db) cfg["snr-db"] = *synth_cfg.snr_db;
            cfg["noiseless"] = !synth_cfg.snr_db.has_value();
            cfg["alpha-max"] = synth_cfg.alpha_max;
            cfg["seed"] = synth_cfg.seed;
            write_provenance(synth_out, "synth", cfg);
            std::cout << "wrote bundle to " << synth_out << "\n";
            return 0;
        }

        if (gradcheck_cmd->parsed()) {
            const auto entries = gradcheck_suite();
            bool ok = true;
            for (const auto& e : entries) {
                std::printf("%-18s max rel err %.3e  (tol %.0e)  %s\n", e.name.c_str(),
                            e.max_rel_err, e.tol, e.pass() ? "ok" : "FAIL");
                ok = ok && e.pass();
            }
            return ok ? 0 : 3;
        }

        if (po.deterministic) {
            par::set_enabled(false);
            po.train.deterministic = true;
        }

        if (init_cmd->parsed() || segment_cmd->parsed() || unmix_cmd->parsed()) {
            const DatasetBundle bundle = load_bundle(po.data);
            std::size_t p = po.endmembers;
            if (p == 0) {
                if (!bundle.gt_endmembers)
                    throw DomainError("--endmembers is required when the bundle has no ground truth");
                p = bundle.gt_endmembers->count();
            }
            fs::create_directories(po.out);
            json cfg;
            cfg["data"] = po.data;
            cfg["endmembers"] = p;
            cfg["seed"] = po.train.seed;
            cfg["deterministic"] = po.deterministic;

            if (init_cmd->parsed()) {
                const Tensor Y = flatten(bundle.cube);
                Tensor Ynn = Y;
                for (double& v : Ynn.data) v = std::max(0.0, v);
                VcaConfig vcfg;
                vcfg.endmembers = p;
                vcfg.seed = po.train.seed;
                const VcaResult res = vca(Ynn, vcfg);
                write_endmember_csv(fs::path(po.out) / "endmembers.csv", res.endmembers);
                const AbundanceField ab =
                    fcls_field(Y, res.endmembers, bundle.cube.height, bundle.cube.width);
                write_abundance_raw(po.out, ab);
                write_provenance(po.out, "init", cfg);
                std::cout << "VCA selected pixels:";
                for (std::size_t idx : res.indices) std::cout << " " << idx;
                std::cout << "\n";
                return 0;
            }

            SlicConfig slic_cfg;
            slic_cfg.size_s = po.size_s;
            slic_cfg.compactness = po.compactness;
            slic_cfg.iterations = po.iterations;
            slic_cfg.seed = po.train.seed;
            cfg["superpixel-size"] = po.size_s;
            cfg["compactness"] = po.compactness;

            if (segment_cmd->parsed()) {
                const Tensor Y = flatten(bundle.cube);
                Tensor Ynn = Y;
                for (double& v : Ynn.data) v = std::max(0.0, v);
                VcaConfig vcfg;
                vcfg.endmembers = p;
                vcfg.seed = po.train.seed;
                const VcaResult res = vca(Ynn, vcfg);
                const AbundanceField ab =
                    fcls_field(Y, res.endmembers, bundle.cube.height, bundle.cube.width);
                const Segmentation seg = slic_segment(ab, slic_cfg);
                std::vector<unsigned> labels(seg.labels.size());
                for (std::size_t i = 0; i < labels.size(); ++i)
                    labels[i] = static_cast<unsigned>(seg.labels[i]);
                write_pgm(fs::path(po.out) / "labels.pgm", seg.height, seg.width, labels, 65535);
                std::string csv = "id,size,center_row,center_col\n";
                for (std::size_t q = 0; q < seg.count(); ++q) {
                    const auto& sp = seg.superpixels[q];
                    csv += std::to_string(q) + "," + std::to_string(sp.members.size()) + "," +
                           std::to_string(sp.center / seg.width) + "," +
                           std::to_string(sp.center % seg.width) + "\n";
                }
                write_text(fs::path(po.out) / "superpixels.csv", csv);
                write_provenance(po.out, "segment", cfg);
                std::cout << "wrote " << seg.count() << " superpixels\n";
                return 0;
            }

            // unmix
            cfg["lambda"] = po.train.lambda_sparsity;
            cfg["mu"] = po.train.mu_collab;
            cfg["lr-encoder"] = po.train.lr_encoder;
            cfg["lr-decoder"] = po.train.lr_decoder;
            cfg["epochs"] = po.train.epochs;
            cfg["batch-size"] = po.train.batch_pixels;
            cfg["dropout"] = po.train.dropout_rate;
            const PipelineArtifacts art = run_pipeline(bundle, p, slic_cfg, po.train);
            emit_unmix_artifacts(po.out, bundle, art, po.train.seed, cfg.dump());
            write_provenance(po.out, "unmix", cfg);
            std::cout << "final epoch loss " << art.train_result.trace.back().total << " ("
                      << art.train_result.trace.size() << " epochs, "
                      << art.segmentation.count() << " superpixels)\n";
            if (art.train_result.skipped > 0)
                std::cout << "skipped " << art.train_result.skipped
                          << " degenerate sample(s) during training\n";
            if (art.result.invariant_warning)
                for (const auto& w : art.result.warnings) std::cout << "warning: " << w << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            const DatasetBundle bundle = load_bundle(eval_data);
            if (!bundle.gt_endmembers)
                throw DomainError("eval: the bundle carries no ground-truth endmembers");
            const EndmemberSet est = read_endmember_csv(fs::path(eval_est) / "endmembers.csv");
            std::optional<AbundanceField> est_ab;
            if (fs::exists(fs::path(eval_est) / "abundances.raw"))
                est_ab = read_abundance_raw(eval_est);
            const MetricReport report = evaluate(
                est, est_ab ? &*est_ab : nullptr, *bundle.gt_endmembers,
                bundle.gt_abundances ? &*bundle.gt_abundances : nullptr, 0, "eval");
            const fs::path out = eval_out.empty() ? fs::path(eval_est) : fs::path(eval_out);
            fs::create_directories(out);
            write_text(out / "metrics.json", report.to_json());
            json cfg;
            cfg["est"] = eval_est;
            cfg["data"] = eval_data;
            write_provenance(out, "eval", cfg);
            std::cout << report.to_table();
            return 0;
        }

        if (sweep_cmd->parsed()) {
            fs::create_directories(po.out);
            std::vector<json> rows;
            std::string csv = "s,m,snr_db,seed,status,mean_sad,mean_rmse,wall_time_s\n";
            auto record = [&](json row, double snr) {
                char buf[256];
                std::snprintf(buf, sizeof buf, "%g,%g,%g,%llu,%s,%.6g,%.6g,%.2f\n",
                              row.value("s", 0.0), row.value("m", 0.0), snr,
                              static_cast<unsigned long long>(row.value("seed", 0ULL)),
                              row.value("status", "ok").c_str(), row.value("mean_sad", -1.0),
                              row.value("mean_rmse", -1.0), row.value("wall_time_s", 0.0));
                csv += buf;
                row["snr_db"] = snr;
                rows.push_back(std::move(row));
            };

            if (!sweep_snr.empty()) {
                sweep_scene.seed = scene_seed;
                for (double snr : sweep_snr) {
                    for (int r = 0; r < sweep_repeats; ++r) {
                        const std::uint64_t run_seed = mix_seed(po.train.seed, r + 1);
                        SynthConfig scfg = sweep_scene;
                        scfg.snr_db = snr;
                        scfg.seed = mix_seed(scene_seed, static_cast<std::uint64_t>(r + 1));
                        try {
                            const DatasetBundle bundle = generate_scene(scfg);
                            json row = sweep_run(po.out, bundle, scfg.endmembers, po.size_s,
                                                 po.compactness, run_seed, po.train);
                            row["status"] = "ok";
                            record(std::move(row), snr);
                        } catch (const std::exception& e) {
                            json row;
                            row["seed"] = run_seed;
                            row["status"] = std::string("failed: ") + e.what();
                            record(std::move(row), snr);
                        }
                    }
                }
            } else {
                if (po.data.empty())
                    throw DomainError("sweep: --data is required for S/m sweeps");
                const DatasetBundle bundle = load_bundle(po.data);
                std::size_t p = po.endmembers;
                if (p == 0) {
                    if (!bundle.gt_endmembers) throw DomainError("sweep: --endmembers required");
                    p = bundle.gt_endmembers->count();
                }
                if (sweep_s.empty()) sweep_s = {po.size_s};
                if (sweep_m.empty()) sweep_m = {po.compactness};
                for (double S : sweep_s)
                    for (double m : sweep_m)
                        for (int r = 0; r < sweep_repeats; ++r) {
                            const std::uint64_t run_seed = mix_seed(po.train.seed, r + 1);
                            try {
                                json row = sweep_run(po.out, bundle, p, S, m, run_seed, po.train);
                                row["status"] = "ok";
                                record(std::move(row), -1.0);
                            } catch (const std::exception& e) {
                                json row;
                                row["s"] = S;
                                row["m"] = m;
                                row["seed"] = run_seed;
                                row["status"] = std::string("failed: ") + e.what();
                                record(std::move(row), -1.0);
                            }
                        }
            }
            write_text(fs::path(po.out) / "sweep.csv", csv);

            // mean +- std per grid cell over the ok rows
            std::string summary = "s,m,snr_db,runs,mean_sad,std_sad,mean_rmse,std_rmse\n";
            std::vector<std::string> seen;
            for (const auto& row : rows) {
                if (row.value("status", "") != "ok") continue;
                char key[96];
                std::snprintf(key, sizeof key, "%g,%g,%g", row.value("s", 0.0), row.value("m", 0.0),
                              row.value("snr_db", -1.0));
                if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
                seen.push_back(key);
                std::vector<double> sads, rmses;
                for (const auto& other : rows) {
                    if (other.value("status", "") != "ok") continue;
                    char okey[96];
                    std::snprintf(okey, sizeof okey, "%g,%g,%g", other.value("s", 0.0),
                                  other.value("m", 0.0), other.value("snr_db", -1.0));
                    if (std::string(okey) != key) continue;
                    if (other.contains("mean_sad")) sads.push_back(other["mean_sad"].get<double>());
                    if (other.contains("mean_rmse"))
                        rmses.push_back(other["mean_rmse"].get<double>());
                }
                auto mean_std = [](const std::vector<double>& v) {
                    if (v.empty()) return std::pair<double, double>(-1.0, -1.0);
                    double m = 0.0;
                    for (double x : v) m += x;
                    m /= static_cast<double>(v.size());
                    double s = 0.0;
                    for (double x : v) s += (x - m) * (x - m);
                    s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
                    return std::pair<double, double>(m, s);
                };
                const auto [ms, ss] = mean_std(sads);
                const auto [mr, sr] = mean_std(rmses);
                char buf[256];
                std::snprintf(buf, sizeof buf, "%s,%zu,%.6g,%.6g,%.6g,%.6g\n", key, sads.size(), ms,
                              ss, mr, sr);
                summary += buf;
            }
            write_text(fs::path(po.out) / "summary.csv", summary);
            json cfg;
            cfg["repeats"] = sweep_repeats;
            cfg["seed"] = po.train.seed;
            cfg["epochs"] = po.train.epochs;
            write_provenance(po.out, "sweep", cfg);
            std::cout << "sweep complete: " << rows.size() << " runs\n";
            return 0;
        }
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
