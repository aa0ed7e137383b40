#include "unmix/bundle_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "unmix/errors.hpp"

namespace unmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_f32le(std::string& out, double v) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

double get_f32le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
}

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& file, const std::string& bytes) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + file.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + file.string());
}

}  // namespace

void write_f32le(const fs::path& file, const double* values, std::size_t count) {
    std::string bytes;
    bytes.reserve(count * 4);
    for (std::size_t i = 0; i < count; ++i) put_f32le(bytes, values[i]);
    write_file(file, bytes);
}

std::vector<double> read_f32le(const fs::path& file, std::size_t expected_count) {
    const std::string bytes = read_file(file);
    if (bytes.size() != expected_count * 4)
        throw FormatError(file.string() + ": expected " + std::to_string(expected_count * 4) +
                          " bytes (" + std::to_string(expected_count) + " float32), found " +
                          std::to_string(bytes.size()));
    std::vector<double> out(expected_count);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < expected_count; ++i) out[i] = get_f32le(p + 4 * i);
    return out;
}

DatasetBundle load_bundle(const fs::path& dir) {
    const fs::path header_path = dir / "header.json";
    if (!fs::exists(header_path))
        throw FormatError("bundle: missing header " + header_path.string());
    json header;
    try {
        header = json::parse(read_file(header_path));
    } catch (const json::exception& e) {
        throw FormatError("bundle: bad header.json: " + std::string(e.what()));
    }
    DatasetBundle bundle;
    try {
        bundle.name = header.at("name").get<std::string>();
        bundle.cube.height = header.at("height").get<std::size_t>();
        bundle.cube.width = header.at("width").get<std::size_t>();
        bundle.cube.bands = header.at("bands").get<std::size_t>();
        if (header.at("dtype").get<std::string>() != "f32le")
            throw FormatError("bundle: unsupported dtype, expected f32le");
        if (header.at("interleave").get<std::string>() != "bsq")
            throw FormatError("bundle: unsupported interleave, expected bsq");
        if (header.contains("wavelengths"))
            bundle.cube.wavelengths = header["wavelengths"].get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw FormatError("bundle: header field error: " + std::string(e.what()));
    }
    const std::size_t H = bundle.cube.height, W = bundle.cube.width, L = bundle.cube.bands;
    const std::size_t n = H * W;

    // band-sequential on disk -> pixel-interleaved in memory
    const std::vector<double> raw = read_f32le(dir / "cube.raw", n * L);
    bundle.cube.reflectance = Tensor::zeros({H, W, L});
    for (std::size_t b = 0; b < L; ++b)
        for (std::size_t k = 0; k < n; ++k) bundle.cube.reflectance.data[k * L + b] = raw[b * n + k];

    const fs::path em_path = dir / "gt_endmembers.csv";
    if (fs::exists(em_path)) {
        std::ifstream in(em_path);
        std::string line;
        std::vector<double> values;
        std::size_t rows = 0, cols = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ls(line);
            std::string cell;
            std::size_t c = 0;
            while (std::getline(ls, cell, ',')) {
                try {
                    values.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw FormatError("gt_endmembers.csv: bad number '" + cell + "' at row " +
                                      std::to_string(rows));
                }
                ++c;
            }
            if (cols == 0) cols = c;
            if (c != cols)
                throw FormatError("gt_endmembers.csv: ragged row " + std::to_string(rows));
            ++rows;
        }
        if (cols != L)
            throw FormatError("gt_endmembers.csv: " + std::to_string(cols) + " columns != bands " +
                              std::to_string(L));
        EndmemberSet em;
        em.signatures = Tensor({rows, cols}, std::move(values));
        bundle.gt_endmembers = std::move(em);
    }

    const fs::path ab_path = dir / "gt_abundances.raw";
    if (fs::exists(ab_path)) {
        if (!bundle.gt_endmembers)
            throw FormatError("bundle: gt_abundances.raw without gt_endmembers.csv");
        const std::size_t p = bundle.gt_endmembers->count();
        AbundanceField field;
        field.height = H;
        field.width = W;
        field.endmembers = p;
        field.fractions = Tensor({H, W, p}, read_f32le(ab_path, n * p));
        bundle.gt_abundances = std::move(field);
    }

    bundle.validate();
    return bundle;
}

void save_bundle(const DatasetBundle& bundle, const fs::path& dir) {
    bundle.validate();
    fs::create_directories(dir);

    json header;
    header["name"] = bundle.name;
    header["height"] = bundle.cube.height;
    header["width"] = bundle.cube.width;
    header["bands"] = bundle.cube.bands;
    header["dtype"] = "f32le";
    header["interleave"] = "bsq";
    if (!bundle.cube.wavelengths.empty()) header["wavelengths"] = bundle.cube.wavelengths;
    write_file(dir / "header.json", header.dump(2) + "\n");

    const std::size_t n = bundle.cube.pixels(), L = bundle.cube.bands;
    std::string bytes;
    bytes.reserve(n * L * 4);
    for (std::size_t b = 0; b < L; ++b)
        for (std::size_t k = 0; k < n; ++k) put_f32le(bytes, bundle.cube.reflectance.data[k * L + b]);
    write_file(dir / "cube.raw", bytes);

    if (bundle.gt_endmembers) {
        std::ostringstream csv;
        const auto& em = *bundle.gt_endmembers;
        for (std::size_t i = 0; i < em.count(); ++i) {
            for (std::size_t b = 0; b < em.bands(); ++b) {
                if (b) csv << ',';
                char buf[32];
                // %.9g round-trips float32 exactly
                std::snprintf(buf, sizeof buf, "%.9g", static_cast<float>(em.row(i)[b]));
                csv << buf;
            }
            csv << '\n';
        }
        write_file(dir / "gt_endmembers.csv", csv.str());
    }

    if (bundle.gt_abundances) {
        const auto& f = *bundle.gt_abundances;
        write_f32le(dir / "gt_abundances.raw", f.fractions.data.data(), f.fractions.numel());
    }
}

}  // namespace unmix
