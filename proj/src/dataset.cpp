#include "d3/dataset.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3/dct.hpp"
#include "d3/io.hpp"
#include "d3/parallel.hpp"
#include "d3/rng.hpp"

namespace d3 {

using nlohmann::json;

void GenConfig::validate() const {
    if (image_side <= 0 || channels <= 0) throw std::invalid_argument("gen: bad image shape");
    if (pitch <= 0 || image_side % pitch != 0)
        throw std::invalid_argument("gen: image side must be divisible by pitch");
    if (amp_lo > amp_hi || amp_lo < 0) throw std::invalid_argument("gen: bad amplitude range");
    if (beta < 0) throw std::invalid_argument("gen: beta must be non-negative");
    if (train_count <= 0 || val_count <= 0 || test_count <= 0)
        throw std::invalid_argument("gen: split counts must be positive");
}

const std::vector<Sample>& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw std::invalid_argument("unknown split: " + name);
}

std::vector<std::pair<int, int>> lattice_frequencies(const GenConfig& cfg) {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < cfg.image_side; u += cfg.pitch)
        for (int v = 0; v < cfg.image_side; v += cfg.pitch) out.emplace_back(u, v);
    return out;
}

namespace {

Sample make_sample(const GenConfig& cfg, const DctBasis<float>& basis, Rng rng, int label) {
    const int n = cfg.image_side, c = cfg.channels;
    TensorF spec({n, n, c});
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            const double mag = std::pow(1.0 + u + v, -cfg.beta);
            for (int k = 0; k < c; ++k)
                spec.at(u, v, k) = static_cast<float>(rng.next_sign() * mag);
        }
    if (label == 1) {
        // random signs keep the pixel distribution symmetric, so the
        // per-sample rescale cannot wash the added energy out
        for (int u = 0; u < n; u += cfg.pitch)
            for (int v = 0; v < n; v += cfg.pitch)
                for (int k = 0; k < c; ++k)
                    spec.at(u, v, k) += static_cast<float>(
                        rng.next_sign() * rng.next_uniform(cfg.amp_lo, cfg.amp_hi));
    }
    Sample s;
    s.label = label;
    idct2(spec, basis, s.pixels);
    float lo = s.pixels.data[0], hi = s.pixels.data[0];
    for (float v : s.pixels.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12f) {
        s.pixels.fill(0.5f);
    } else {
        const float inv = 1.0f / (hi - lo);
        for (float& v : s.pixels.data) v = (v - lo) * inv;
    }
    check_finite(s.pixels, "generated sample");
    return s;
}

void generate_split(const GenConfig& cfg, const DctBasis<float>& basis, const Rng& split_rng,
                    int count, std::vector<Sample>& out) {
    out.resize(count);
    parallel_for(count, [&](std::int64_t i) {
        out[i] = make_sample(cfg, basis, split_rng.stream(static_cast<std::uint64_t>(i)),
                             static_cast<int>(i % 2));
    });
}

std::string header_json(const Dataset& ds) {
    const GenConfig& c = ds.config;
    json j;
    j["image_side"] = c.image_side;
    j["channels"] = c.channels;
    j["counts"] = {{"train", c.train_count}, {"val", c.val_count}, {"test", c.test_count}};
    j["config"] = {{"pitch", c.pitch},     {"amp_lo", c.amp_lo}, {"amp_hi", c.amp_hi},
                   {"beta", c.beta},       {"seed", c.seed},     {"image_side", c.image_side},
                   {"channels", c.channels}};
    j["seed"] = c.seed;
    j["version"] = Dataset::kFormatVersion;
    return j.dump();
}

}  // namespace

Dataset generate(const GenConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    const auto basis = DctBasis<float>::make(cfg.image_side);
    const Rng root = Rng::from_seed(cfg.seed).stream("data");
    generate_split(cfg, basis, root.stream("train"), cfg.train_count, ds.train);
    generate_split(cfg, basis, root.stream("val"), cfg.val_count, ds.val);
    generate_split(cfg, basis, root.stream("test"), cfg.test_count, ds.test);
    return ds;
}

void save(const Dataset& ds, const std::string& path) {
    ByteWriter w;
    w.str("D3DS");
    w.u16(Dataset::kFormatVersion);
    const std::string header = header_json(ds);
    w.u32(static_cast<std::uint32_t>(header.size()));
    w.str(header);

    ByteWriter payload;
    for (const auto* split : {&ds.train, &ds.val, &ds.test})
        for (const Sample& s : *split)
            for (float v : s.pixels.data) payload.f32(v);
    for (const auto* split : {&ds.train, &ds.val, &ds.test})
        for (const Sample& s : *split) payload.u8(static_cast<std::uint8_t>(s.label));

    w.str(payload.bytes);
    w.u32(crc32(payload.bytes));
    write_file(path, w.bytes);
}

Dataset load(const std::string& path) {
    const std::string bytes = read_file(path);
    ByteReader r(bytes);
    if (r.str(4) != "D3DS") throw std::runtime_error("bad magic in dataset file: " + path);
    const std::uint16_t version = r.u16();
    if (version != Dataset::kFormatVersion)
        throw std::runtime_error("version mismatch in dataset file: " + path);
    const std::uint32_t hlen = r.u32();
    json h = json::parse(r.str(hlen));

    Dataset ds;
    GenConfig& c = ds.config;
    c.image_side = h.at("image_side").get<int>();
    c.channels = h.at("channels").get<int>();
    c.train_count = h.at("counts").at("train").get<int>();
    c.val_count = h.at("counts").at("val").get<int>();
    c.test_count = h.at("counts").at("test").get<int>();
    const json& cj = h.at("config");
    c.pitch = cj.at("pitch").get<int>();
    c.amp_lo = cj.at("amp_lo").get<double>();
    c.amp_hi = cj.at("amp_hi").get<double>();
    c.beta = cj.at("beta").get<double>();
    c.seed = h.at("seed").get<std::uint64_t>();

    const std::size_t total =
        static_cast<std::size_t>(c.train_count) + c.val_count + c.test_count;
    const std::size_t pix = static_cast<std::size_t>(c.feature_count());
    const std::size_t payload_len = total * pix * 4 + total;
    if (r.remaining() < payload_len + 4) throw std::runtime_error("truncated file: " + path);

    const std::string payload = bytes.substr(r.pos, payload_len);
    ByteReader pr(payload);
    auto read_split = [&](int count, std::vector<Sample>& out) {
        out.resize(count);
        for (Sample& s : out) {
            s.pixels = TensorF({c.image_side, c.image_side, c.channels});
            for (float& v : s.pixels.data) v = pr.f32();
        }
    };
    read_split(c.train_count, ds.train);
    read_split(c.val_count, ds.val);
    read_split(c.test_count, ds.test);
    for (auto* split : {&ds.train, &ds.val, &ds.test})
        for (Sample& s : *split) s.label = pr.u8();

    r.pos += payload_len;
    const std::uint32_t stored = r.u32();
    if (stored != crc32(payload)) throw std::runtime_error("checksum failure in dataset file: " + path);
    return ds;
}

std::vector<Sample> filter_label(const std::vector<Sample>& samples, int label) {
    std::vector<Sample> out;
    for (const Sample& s : samples)
        if (s.label == label) out.push_back(s);
    return out;
}

std::vector<Sample> take(const std::vector<Sample>& samples, int count) {
    if (count < 0 || count >= static_cast<int>(samples.size())) return samples;
    return std::vector<Sample>(samples.begin(), samples.begin() + count);
}

}  // namespace d3
