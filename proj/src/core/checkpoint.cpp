#include "core/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "core/common.hpp"

namespace avatar {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'A', 'V', 'A', 'T', 'A', 'R', 'C', 'K'};

struct BlobEntry {
    std::string name;
    std::vector<std::size_t> shape;
    const double* data = nullptr;
    std::size_t count = 0;
};

std::string to_hex(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t from_hex(const std::string& s) {
    require(s.rfind("0x", 0) == 0 && s.size() == 18, ErrorCategory::io,
            "checkpoint: malformed hex word '" + s + "'");
    return std::stoull(s.substr(2), nullptr, 16);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    require(in.good(), ErrorCategory::io, "checkpoint: unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

void write_doubles(std::ofstream& out, const double* data, std::size_t count) {
    static_assert(sizeof(double) == 8);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &data[i], 8);
            write_u64(out, bits);
        }
    }
}

json config_to_json(const TrainConfig& c) {
    return json{{"stage1_iters", c.stage1_iters},
                {"stage2_iters", c.stage2_iters},
                {"stage3_iters", c.stage3_iters},
                {"batch_size", c.batch_size},
                {"hidden_size", c.hidden_size},
                {"layer_count", c.layer_count},
                {"latent_dim", c.latent_dim},
                {"learning_rate", c.learning_rate},
                {"seed", c.seed},
                {"disc_ratio", c.disc_ratio},
                {"disable_al", c.disable_al},
                {"disable_dl", c.disable_dl},
                {"disable_jt", c.disable_jt},
                {"disable_rg", c.disable_rg}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.stage1_iters = j.at("stage1_iters").get<std::uint64_t>();
    c.stage2_iters = j.at("stage2_iters").get<std::uint64_t>();
    c.stage3_iters = j.at("stage3_iters").get<std::uint64_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.hidden_size = j.at("hidden_size").get<std::size_t>();
    c.layer_count = j.at("layer_count").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.disc_ratio = j.at("disc_ratio").get<std::uint64_t>();
    c.disable_al = j.at("disable_al").get<bool>();
    c.disable_dl = j.at("disable_dl").get<bool>();
    c.disable_jt = j.at("disable_jt").get<bool>();
    c.disable_rg = j.at("disable_rg").get<bool>();
    return c;
}

// Canonical entry order shared by save and load: model parameters, batch-norm
// buffers, normalizer, Adam moments per network in parameter order.
std::vector<BlobEntry> collect_entries(Trainer& trainer, const NormalizerState& normalizer) {
    std::vector<BlobEntry> entries;
    AvatarModel& model = trainer.model();

    for (auto& [name, tensor] : model.named_parameters()) {
        auto v = tensor.values();
        entries.push_back({name, tensor.shape(), v.data(), v.size()});
    }
    for (auto& [name, buffer] : model.named_buffers())
        entries.push_back({name, {buffer->size()}, buffer->data(), buffer->size()});

    entries.push_back({"normalizer.mins", {normalizer.mins.size()}, normalizer.mins.data(),
                       normalizer.mins.size()});
    entries.push_back({"normalizer.maxs", {normalizer.maxs.size()}, normalizer.maxs.data(),
                       normalizer.maxs.size()});

    auto add_adam = [&entries](const char* net, AdamState& state) {
        const auto& m = state.first_moments();
        const auto& v = state.second_moments();
        for (std::size_t i = 0; i < m.size(); ++i) {
            entries.push_back({std::string("adam.") + net + ".m" + std::to_string(i),
                               {m[i].size()}, m[i].data(), m[i].size()});
            entries.push_back({std::string("adam.") + net + ".v" + std::to_string(i),
                               {v[i].size()}, v[i].data(), v[i].size()});
        }
    };
    add_adam("encoder", trainer.adam_encoder());
    add_adam("decoder", trainer.adam_decoder());
    add_adam("supervisor", trainer.adam_supervisor());
    add_adam("discriminator", trainer.adam_discriminator());
    return entries;
}

}  // namespace

void save_checkpoint(const std::string& path, Trainer& trainer, const NormalizerState& normalizer,
                     std::size_t sequence_steps) {
    const auto entries = collect_entries(trainer, normalizer);

    json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["train_config"] = config_to_json(trainer.config());
    manifest["feature_dim"] = trainer.model().dims.feature_dim;
    manifest["sequence_steps"] = sequence_steps;
    manifest["trained"] = trainer.model().trained;
    manifest["progress"] = {{"stage", trainer.progress().stage}, {"iter", trainer.progress().iter}};
    manifest["adam_steps"] = {{"encoder", trainer.adam_encoder().step_count()},
                              {"decoder", trainer.adam_decoder().step_count()},
                              {"supervisor", trainer.adam_supervisor().step_count()},
                              {"discriminator", trainer.adam_discriminator().step_count()}};
    json rng_state = json::array();
    for (std::uint64_t word : trainer.rng().state()) rng_state.push_back(to_hex(word));
    manifest["rng_state"] = rng_state;

    json tensor_list = json::array();
    std::uint64_t offset = 0;
    for (const BlobEntry& e : entries) {
        tensor_list.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
        offset += e.count;
    }
    manifest["tensors"] = tensor_list;

    const std::string manifest_text = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCategory::io, "checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, kCheckpointVersion);
    write_u64(out, manifest_text.size());
    out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
    write_u64(out, offset);
    for (const BlobEntry& e : entries) write_doubles(out, e.data, e.count);
    require(out.good(), ErrorCategory::io, "checkpoint: write failed for " + path);
}

CheckpointBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCategory::io, "checkpoint: cannot open " + path);

    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorCategory::io,
            "checkpoint: " + path + " is not an avatar checkpoint");
    const std::uint64_t version = read_u64(in);
    require(version == kCheckpointVersion, ErrorCategory::io,
            "checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kCheckpointVersion) + ")");

    const std::uint64_t manifest_len = read_u64(in);
    std::string manifest_text(manifest_len, '\0');
    in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_len));
    require(in.good(), ErrorCategory::io, "checkpoint: truncated manifest in " + path);

    json manifest;
    try {
        manifest = json::parse(manifest_text);
    } catch (const json::exception& e) {
        fail(ErrorCategory::io, std::string("checkpoint: manifest parse error: ") + e.what());
    }

    const std::uint64_t blob_len = read_u64(in);
    std::vector<double> blob(blob_len);
    in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_len * 8));
    require(static_cast<std::uint64_t>(in.gcount()) == blob_len * 8, ErrorCategory::io,
            "checkpoint: truncated blob in " + path + " (expected " + std::to_string(blob_len * 8) +
                " bytes at offset " + std::to_string(sizeof(kMagic) + 24 + manifest_len) + ")");
    if constexpr (std::endian::native != std::endian::little) {
        for (double& d : blob) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            bits = __builtin_bswap64(bits);
            std::memcpy(&d, &bits, 8);
        }
    }

    CheckpointBundle bundle;
    const TrainConfig config = config_from_json(manifest.at("train_config"));
    const auto feature_dim = manifest.at("feature_dim").get<std::size_t>();
    bundle.sequence_steps = manifest.at("sequence_steps").get<std::size_t>();
    bundle.trainer = std::make_unique<Trainer>(config, feature_dim);
    Trainer& trainer = *bundle.trainer;

    // Map manifest entries and verify they tile the blob exactly.
    struct Slot {
        std::vector<std::size_t> shape;
        std::uint64_t offset;
        bool used = false;
    };
    std::map<std::string, Slot> slots;
    std::uint64_t expected_offset = 0;
    for (const json& t : manifest.at("tensors")) {
        Slot slot;
        slot.offset = t.at("offset").get<std::uint64_t>();
        slot.shape = t.at("shape").get<std::vector<std::size_t>>();
        require(slot.offset == expected_offset, ErrorCategory::io,
                "checkpoint: manifest entry '" + t.at("name").get<std::string>() +
                    "' at offset " + std::to_string(slot.offset) + " does not tile the blob (expected " +
                    std::to_string(expected_offset) + ")");
        std::size_t count = 1;
        for (std::size_t d : slot.shape) count *= d;
        expected_offset += count;
        slots.emplace(t.at("name").get<std::string>(), std::move(slot));
    }
    require(expected_offset == blob_len, ErrorCategory::io,
            "checkpoint: manifest covers " + std::to_string(expected_offset) +
                " values but blob holds " + std::to_string(blob_len));

    auto take = [&](const std::string& name, std::size_t count) -> const double* {
        auto it = slots.find(name);
        require(it != slots.end(), ErrorCategory::io, "checkpoint: missing tensor '" + name + "'");
        std::size_t stored = 1;
        for (std::size_t d : it->second.shape) stored *= d;
        require(stored == count, ErrorCategory::io,
                "checkpoint: tensor '" + name + "' holds " + std::to_string(stored) +
                    " values, expected " + std::to_string(count));
        it->second.used = true;
        return blob.data() + it->second.offset;
    };

    AvatarModel& model = trainer.model();
    for (auto& [name, tensor] : model.named_parameters()) {
        auto dst = tensor.values_mut();
        std::copy_n(take(name, dst.size()), dst.size(), dst.begin());
    }
    for (auto& [name, buffer] : model.named_buffers())
        std::copy_n(take(name, buffer->size()), buffer->size(), buffer->begin());

    {
        auto it = slots.find("normalizer.mins");
        require(it != slots.end(), ErrorCategory::io, "checkpoint: missing normalizer");
        const std::size_t f = it->second.shape.at(0);
        const double* mins = take("normalizer.mins", f);
        bundle.normalizer.mins.assign(mins, mins + f);
        const double* maxs = take("normalizer.maxs", f);
        bundle.normalizer.maxs.assign(maxs, maxs + f);
    }

    const json& adam_steps = manifest.at("adam_steps");
    auto restore_adam = [&](const char* net, AdamState& state, std::vector<Tensor> params) {
        const std::uint64_t steps = adam_steps.at(net).get<std::uint64_t>();
        if (slots.find(std::string("adam.") + net + ".m0") == slots.end()) {
            // The optimizer never ran for this network; moments stay lazy.
            require(steps == 0, ErrorCategory::io,
                    std::string("checkpoint: adam state for ") + net + " lost its moments");
            return;
        }
        std::vector<std::vector<double>> m, v;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const std::size_t count = params[i].numel();
            const double* md = take(std::string("adam.") + net + ".m" + std::to_string(i), count);
            const double* vd = take(std::string("adam.") + net + ".v" + std::to_string(i), count);
            m.emplace_back(md, md + count);
            v.emplace_back(vd, vd + count);
        }
        state.restore(steps, std::move(m), std::move(v));
    };
    restore_adam("encoder", trainer.adam_encoder(), model.encoder.parameters());
    restore_adam("decoder", trainer.adam_decoder(), model.decoder.parameters());
    restore_adam("supervisor", trainer.adam_supervisor(), model.supervisor.parameters());
    restore_adam("discriminator", trainer.adam_discriminator(), model.discriminator.parameters());

    for (const auto& [name, slot] : slots)
        require(slot.used, ErrorCategory::io, "checkpoint: unexpected tensor '" + name + "'");

    std::array<std::uint64_t, 4> rng_state{};
    const json& rng_json = manifest.at("rng_state");
    require(rng_json.is_array() && rng_json.size() == 4, ErrorCategory::io,
            "checkpoint: malformed rng state");
    for (std::size_t i = 0; i < 4; ++i) rng_state[i] = from_hex(rng_json[i].get<std::string>());
    trainer.set_rng_state(rng_state);

    TrainProgress progress;
    progress.stage = manifest.at("progress").at("stage").get<int>();
    progress.iter = manifest.at("progress").at("iter").get<std::uint64_t>();
    trainer.set_progress(progress);
    model.trained = manifest.at("trained").get<bool>();

    return bundle;
}

}  // namespace avatar
